#include "aita/archive.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aita {

namespace {

constexpr char kMagic[8] = {'A', 'I', 'T', 'A', 'a', 'r', 'c', '1'};
constexpr int kFormatVersion = 1;

void put_u64_le(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

void ArchiveWriter::add(const std::string& name, const void* data, std::size_t bytes) {
    Section s;
    s.name = name;
    s.bytes.resize(bytes);
    if (bytes > 0) std::memcpy(s.bytes.data(), data, bytes);
    sections_.push_back(std::move(s));
}

void ArchiveWriter::add_text(const std::string& name, const std::string& text) {
    add(name, text.data(), text.size());
}

void ArchiveWriter::add_f32(const std::string& name, const Mat& m) {
    std::vector<float> f(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) f[i] = static_cast<float>(m.a[i]);
    add_f32(name, f);
}

void ArchiveWriter::add_f32(const std::string& name, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    add(name, v.data(), v.size() * 4);
}

void ArchiveWriter::write(const std::string& path) const {
    nlohmann::json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["meta"] = meta_;
    nlohmann::json table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& s : sections_) {
        table.push_back({{"name", s.name}, {"offset", offset}, {"bytes", s.bytes.size()}});
        offset += s.bytes.size();
    }
    manifest["sections"] = table;
    const std::string mjson = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write archive: " + path);
    out.write(kMagic, 8);
    put_u64_le(out, mjson.size());
    out.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
    for (const auto& s : sections_) {
        out.write(s.bytes.data(), static_cast<std::streamsize>(s.bytes.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

ArchiveReader::ArchiveReader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not an archive (bad magic): " + path);
    const std::uint64_t mlen = get_u64_le(in);
    std::string mjson(mlen, '\0');
    in.read(mjson.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw std::runtime_error("truncated archive manifest: " + path);
    nlohmann::json manifest = nlohmann::json::parse(mjson);
    if (manifest.at("format_version").get<int>() != kFormatVersion)
        throw std::runtime_error("unsupported archive format_version in " + path);
    meta_ = manifest.at("meta");
    payload_base_ = 16 + mlen;
    for (const auto& e : manifest.at("sections")) {
        entries_.emplace_back(e.at("name").get<std::string>(),
                              Entry{e.at("offset").get<std::uint64_t>(),
                                    e.at("bytes").get<std::uint64_t>()});
    }
}

bool ArchiveReader::has(const std::string& name) const {
    for (const auto& [n, e] : entries_)
        if (n == name) return true;
    return false;
}

const ArchiveReader::Entry& ArchiveReader::find(const std::string& name) const {
    for (const auto& [n, e] : entries_)
        if (n == name) return e;
    throw std::runtime_error("archive section not found: " + name + " in " + path_);
}

std::vector<char> ArchiveReader::read(const std::string& name) const {
    const Entry& e = find(name);
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive: " + path_);
    in.seekg(static_cast<std::streamoff>(payload_base_ + e.offset));
    std::vector<char> buf(e.bytes);
    in.read(buf.data(), static_cast<std::streamsize>(e.bytes));
    if (!in) throw std::runtime_error("truncated archive section: " + name);
    return buf;
}

std::string ArchiveReader::read_text(const std::string& name) const {
    auto b = read(name);
    return std::string(b.begin(), b.end());
}

std::vector<float> ArchiveReader::read_f32_raw(const std::string& name) const {
    auto b = read(name);
    if (b.size() % 4 != 0) throw std::runtime_error("section size not a multiple of 4: " + name);
    std::vector<float> f(b.size() / 4);
    std::memcpy(f.data(), b.data(), b.size());
    return f;
}

Mat ArchiveReader::read_f32(const std::string& name, int rows, int cols) const {
    auto f = read_f32_raw(name);
    if (f.size() != static_cast<std::size_t>(rows) * cols)
        throw std::runtime_error("section shape mismatch: " + name);
    Mat m(rows, cols);
    for (std::size_t i = 0; i < f.size(); ++i) m.a[i] = static_cast<double>(f[i]);
    return m;
}

} // namespace aita
