#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iterator>
#include <memory>

#include "cli.hpp"
#include "infsamp/error.hpp"

#ifndef INFSAMP_VERSION
#define INFSAMP_VERSION "0.0.0"
#endif

namespace infsamp::cli {

const char* version() { return INFSAMP_VERSION; }

std::string sha256_bytes(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw IoError("sha256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "' for hashing");
  return sha256_bytes(std::string(std::istreambuf_iterator<char>(in), {}));
}

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["tool"] = "infsamp";
  j["version"] = version();
  j["argv"] = argv;
  j["config"] = config;
  j["seeds"] = seeds;
  auto digests = [](const std::vector<std::string>& paths) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) arr.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    return arr;
  };
  j["inputs"] = digests(inputs);
  j["artifacts"] = digests(artifacts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

LoadedManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  LoadedManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.argv = j.at("argv").get<std::vector<std::string>>();
    for (const auto& e : j.at("inputs")) m.inputs.emplace_back(e.at("path"), e.at("sha256"));
    for (const auto& e : j.at("artifacts")) m.artifacts.emplace_back(e.at("path"), e.at("sha256"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest '" + path.string() + "': " + e.what());
  }
  if (m.argv.empty()) throw DataError("manifest '" + path.string() + "' has an empty argv");
  return m;
}

}  // namespace infsamp::cli
