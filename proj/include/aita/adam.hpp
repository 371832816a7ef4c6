#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "aita/mat.hpp"

namespace aita {

struct NamedParam {
    std::string name;
    Mat* m;
};

// Adam with bias correction. Slot layout is fixed by the parameter registry
// order, which is stable for a given model shape.
class Adam {
  public:
    Adam(const std::vector<NamedParam>& params, double lr,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params) {
            m_.emplace_back(p.m->rows, p.m->cols);
            v_.emplace_back(p.m->rows, p.m->cols);
        }
    }

    // Applies one descent step of `grads` to `params` (aligned registries).
    void step(const std::vector<NamedParam>& params, const std::vector<NamedParam>& grads) {
        if (params.size() != grads.size() || params.size() != m_.size())
            throw std::runtime_error("adam: registry size mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t k = 0; k < params.size(); ++k) {
            Mat& p = *params[k].m;
            const Mat& g = *grads[k].m;
            Mat& m = m_[k];
            Mat& v = v_[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m.a[i] = beta1_ * m.a[i] + (1.0 - beta1_) * g.a[i];
                v.a[i] = beta2_ * v.a[i] + (1.0 - beta2_) * g.a[i] * g.a[i];
                const double mhat = m.a[i] / bc1;
                const double vhat = v.a[i] / bc2;
                p.a[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    double lr() const { return lr_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

} // namespace aita
