#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipole {

inline constexpr const char* artifact_version = "1.0.0";

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal form, so reruns give byte-identical files.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Metadata = std::map<std::string, std::string>;

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
        if (path.has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(path.parent_path(), ec);
            if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
        columns_ = header.size();
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw std::logic_error("CSV row width does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(format_number(v));
        row(s);
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("failed writing " + path_.string());
    }

    ~CsvWriter() {
        if (out_.is_open()) out_.close();
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t columns_ = 0;
};

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".meta");
    return p;
}

// `key = value` lines, sorted by key, plus the artifact version.
inline void write_metadata(const std::filesystem::path& csv, Metadata meta) {
    meta["artifact_version"] = artifact_version;
    std::ofstream out(meta_path(csv), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + meta_path(csv).string() + " for writing");
    for (const auto& [k, v] : meta) out << k << " = " << v << '\n';
    if (!out) throw IoError("failed writing " + meta_path(csv).string());
}

// FNV-1a over the decimal forms; identifies an evaluation grid in metadata.
inline std::string grid_hash(const std::vector<std::vector<double>>& axes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& axis : axes) {
        for (double v : axis)
            for (char c : format_number(v) + ";") {
                h ^= static_cast<unsigned char>(c);
                h *= 0x100000001b3ULL;
            }
        h ^= '|';
        h *= 0x100000001b3ULL;
    }
    std::ostringstream s;
    s << std::hex << h;
    return s.str();
}

}  // namespace dipole
