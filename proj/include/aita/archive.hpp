#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aita/mat.hpp"

namespace aita {

// Single-file container: magic, little-endian u64 manifest length, JSON
// manifest, then the raw sections back to back. The manifest carries
// format_version, caller metadata, and the section table; nlohmann keeps
// object keys sorted, so identical content serializes to identical bytes.
class ArchiveWriter {
  public:
    nlohmann::json& meta() { return meta_; }

    void add(const std::string& name, const void* data, std::size_t bytes);
    void add_text(const std::string& name, const std::string& text);
    // Narrows doubles to float32, little-endian.
    void add_f32(const std::string& name, const Mat& m);
    void add_f32(const std::string& name, const std::vector<float>& v);

    void write(const std::string& path) const;

  private:
    struct Section {
        std::string name;
        std::vector<char> bytes;
    };
    nlohmann::json meta_ = nlohmann::json::object();
    std::vector<Section> sections_;
};

class ArchiveReader {
  public:
    explicit ArchiveReader(const std::string& path); // throws on bad magic/version

    const nlohmann::json& meta() const { return meta_; }
    bool has(const std::string& name) const;
    std::vector<char> read(const std::string& name) const;
    std::string read_text(const std::string& name) const;
    // Widens float32 sections back to doubles; shape from the caller.
    Mat read_f32(const std::string& name, int rows, int cols) const;
    std::vector<float> read_f32_raw(const std::string& name) const;

  private:
    struct Entry {
        std::uint64_t offset;
        std::uint64_t bytes;
    };
    std::string path_;
    nlohmann::json meta_;
    std::uint64_t payload_base_ = 0;
    std::vector<std::pair<std::string, Entry>> entries_;
    const Entry& find(const std::string& name) const;
};

} // namespace aita
