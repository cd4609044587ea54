#pragma once

// Run artifacts: manifest.json plus CSV and JSON files that all carry the
// manifest's SHA-256 in their header.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace transportlab {

inline constexpr const char* kToolName = "transportlab";
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256: OpenSSL digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// 17 significant digits: round-trips every double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  template <class... Cells> void add(const Cells&... cells) { rows.push_back({cell(cells)...}); }

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
};

class ArtifactWriter {
 public:
  /// The manifest hash covers tool, version, subcommand and resolved config.
  ArtifactWriter(std::filesystem::path dir, const std::string& subcommand, const nlohmann::ordered_json& config)
      : dir_(std::move(dir)) {
    manifest_["tool"] = kToolName;
    manifest_["version"] = kToolVersion;
    manifest_["subcommand"] = subcommand;
    manifest_["config"] = config;
    hash_ = sha256_hex(manifest_.dump());
    std::filesystem::create_directories(dir_);
    nlohmann::ordered_json j;
    j["manifest_sha256"] = hash_;
    for (const auto& [k, v] : manifest_.items()) j[k] = v;
    write_text("manifest.json", j.dump(2) + "\n");
  }

  const std::string& hash() const { return hash_; }
  const std::filesystem::path& directory() const { return dir_; }

  void write_csv(const std::string& name, const CsvTable& table) const {
    std::string out = header_lines();
    out += join(table.columns) + "\n";
    for (const auto& row : table.rows) {
      if (row.size() != table.columns.size())
        throw std::logic_error("write_csv: row width does not match the header of " + name);
      out += join(row) + "\n";
    }
    write_text(name, out);
  }

  /// JSON summary with the manifest hash as its first key.
  void write_json(const std::string& name, const nlohmann::ordered_json& body) const {
    nlohmann::ordered_json j;
    j["manifest_sha256"] = hash_;
    j["tool_version"] = kToolVersion;
    for (const auto& [k, v] : body.items()) j[k] = v;
    write_text(name, j.dump(2) + "\n");
  }

 private:
  std::string header_lines() const {
    return std::string("# ") + kToolName + " " + kToolVersion + "\n# manifest-sha256: " + hash_ + "\n";
  }

  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    return s;
  }

  void write_text(const std::string& name, const std::string& text) const {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }

  std::filesystem::path dir_;
  nlohmann::ordered_json manifest_;
  std::string hash_;
};

}  // namespace transportlab
