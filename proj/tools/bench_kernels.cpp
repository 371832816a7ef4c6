// Times the OpenMP kernels against their serial reference twins, plus one
// end-to-end encoder fan-out. The parallel kernels must stay bitwise equal
// to the reference, so this is purely a throughput comparison.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "aita/kernels.hpp"
#include "aita/ranker.hpp"
#include "aita/rng.hpp"

using namespace aita;
using Clock = std::chrono::steady_clock;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
    return m;
}

template <class F>
double time_ms(int reps, F&& f) {
    f(); // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_matmul(int n, int reps) {
    Rng rng(1);
    const Mat A = random_mat(n, n, rng);
    const Mat B = random_mat(n, n, rng);
    Mat C;
    const double serial = time_ms(reps, [&] { kernels::ref::matmul(A, B, C); });
    const double parallel = time_ms(reps, [&] { kernels::matmul(A, B, C); });
    const double mflop = 2.0 * n * n * n / 1e6; // MFLOP per ms equals GFLOP/s
    std::printf(
        "matmul %4dx%-4d  serial %8.2f ms (%6.2f GF/s)  omp %8.2f ms (%6.2f GF/s)  speedup %.2fx\n",
        n, n, serial, mflop / serial, parallel, mflop / parallel, serial / parallel);
}

void bench_softmax(int rows, int cols, int reps) {
    Rng rng(2);
    const Mat X0 = random_mat(rows, cols, rng);
    Mat X;
    const double serial = time_ms(reps, [&] {
        X = X0;
        kernels::ref::softmax_rows(X);
    });
    const double parallel = time_ms(reps, [&] {
        X = X0;
        kernels::softmax_rows(X);
    });
    std::printf("softmax_rows %5dx%-4d  serial %8.2f ms  omp %8.2f ms  speedup %.2fx\n", rows,
                cols, serial, parallel, serial / parallel);
}

void bench_encoder_fanout(int n_texts, int reps) {
    RunConfig cfg;
    cfg.embedding_dim = 64;
    cfg.attn_dim = 64;
    cfg.heads = 4;
    cfg.aspect_dim = 8;
    Rng rng(3);
    RankerParams p = RankerParams::init(cfg, rng);
    EmbeddingTable emb;
    emb.dim = cfg.embedding_dim;
    emb.data.resize(500 * cfg.embedding_dim);
    for (float& f : emb.data) f = static_cast<float>(rng.uniform(-0.1, 0.1));

    std::vector<std::vector<int>> texts(n_texts);
    for (auto& t : texts) {
        t.resize(8 + rng.uniform_int(12));
        for (int& id : t) id = rng.uniform_int(500);
    }
    std::vector<AspectInfo> out(n_texts);

    const double serial = time_ms(reps, [&] {
        for (int i = 0; i < n_texts; ++i) out[i] = ranker_aspects(texts[i], p, emb);
    });
    const double parallel = time_ms(reps, [&] {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n_texts; ++i) out[i] = ranker_aspects(texts[i], p, emb);
    });
    std::printf("encoder fan-out over %d texts  serial %8.2f ms  omp %8.2f ms  speedup %.2fx\n",
                n_texts, serial, parallel, serial / parallel);
}

} // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
    std::printf("openmp max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp\n");
#endif
    for (int n : {128, 256, 512}) bench_matmul(n, n <= 256 ? 20 : 5);
    bench_softmax(4096, 512, 20);
    bench_encoder_fanout(600, 5);
    return 0;
}
