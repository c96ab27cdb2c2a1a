#include "cosdd/manifest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "cosdd/error.hpp"

namespace cosdd {

namespace fs = std::filesystem;

namespace {

using DigestPtr = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

DigestPtr start_digest() {
  DigestPtr ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  return ctx;
}

std::string finish_digest(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &length);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot read " + path.string());
  auto ctx = start_digest();
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  return finish_digest(ctx.get());
}

std::string sha256_text(std::string_view text) {
  auto ctx = start_digest();
  EVP_DigestUpdate(ctx.get(), text.data(), text.size());
  return finish_digest(ctx.get());
}

namespace {

void append_hashes(nlohmann::json& list, const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  for (const auto& file : files) {
    list.push_back({{"path", file.string()}, {"bytes", fs::file_size(file)}, {"sha256", sha256_file(file)}});
  }
}

}  // namespace

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)) {}

void Manifest::add_input(const fs::path& path) { append_hashes(inputs_, path); }

void Manifest::add_artifact(const fs::path& path) { append_hashes(artifacts_, path); }

nlohmann::json Manifest::to_json() const {
  return {{"command", command_}, {"argv", argv_},       {"parameters", parameters_},
          {"inputs", inputs_},   {"artifacts", artifacts_}};
}

void Manifest::write(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace cosdd
