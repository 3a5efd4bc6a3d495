#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "error.hpp"

namespace evprof {

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorKind::io, "sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct StageRecord {
  std::string name;
  std::map<std::string, std::uint64_t> counts;
  double wall_seconds = 0.0;
};

// Provenance for one CLI invocation: what ran, on which inputs, with which
// settings, and what it produced.
class RunManifest {
public:
  explicit RunManifest(std::string command) : command_(std::move(command)) {}

  void set_config(std::map<std::string, std::string> config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void add_input(const std::filesystem::path& path) {
    inputs_.push_back({{"path", path.string()},
                       {"bytes", std::filesystem::file_size(path)},
                       {"sha256", sha256_file(path)}});
  }

  void add_output(const std::string& name) { outputs_.push_back(name); }

  // Times the callable and records the counts it returns.
  template <class Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = fn();
    StageRecord rec;
    rec.name = name;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages_.push_back(rec);
    return result;
  }

  void count(const std::string& key, std::uint64_t value) {
    if (stages_.empty()) throw Error(ErrorKind::parameter, "no stage to attach counts to");
    stages_.back().counts[key] = value;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "evprof";
    j["version"] = kToolVersion;
    j["command"] = command_;
    j["seed"] = seed_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : stages_)
      stages.push_back({{"name", s.name}, {"counts", s.counts}, {"wall_seconds", s.wall_seconds}});
    j["stages"] = stages;
    j["outputs"] = outputs_;
    return j;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::io, "cannot write manifest " + path.string());
    f << to_json().dump(2) << '\n';
  }

private:
  std::string command_;
  std::map<std::string, std::string> config_;
  std::uint64_t seed_ = 0;
  std::vector<nlohmann::json> inputs_;
  std::vector<StageRecord> stages_;
  std::vector<std::string> outputs_;
};

// Checks every recorded input digest against the file on disk.
inline bool manifest_inputs_match(const nlohmann::json& manifest) {
  for (const auto& in : manifest.at("inputs")) {
    const std::filesystem::path p = in.at("path").get<std::string>();
    if (!std::filesystem::exists(p) || sha256_file(p) != in.at("sha256").get<std::string>()) return false;
  }
  return true;
}

}  // namespace evprof
