#include "cosdd/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <zlib.h>

#include "cosdd/error.hpp"
#include "json.hpp"

namespace cosdd {

namespace {

constexpr std::string_view kMagic = "COSDD-CHECKPOINT\n";

std::uint32_t crc32_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) fail(ErrorCode::CorruptFile, "checkpoint header is truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

std::string read_exact(std::istream& in, std::uint64_t size, const char* what) {
  std::string out(size, '\0');
  in.read(out.data(), static_cast<std::streamsize>(size));
  if (static_cast<std::uint64_t>(in.gcount()) != size) fail(ErrorCode::CorruptFile, std::string(what) + " is truncated");
  return out;
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  state.model->save(archive);
  state.optimizers.vae.save(archive, "optim.vae");
  state.optimizers.signal.save(archive, "optim.signal");
  std::ostringstream payload_stream;
  archive.save_to(payload_stream);
  const auto payload = payload_stream.str();

  nlohmann::json header;
  header["format"] = "cosdd-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = to_text(state.config);
  header["norm"] = {{"mean", state.norm.mean}, {"std", state.norm.std}};
  header["step"] = state.step;
  header["payload_bytes"] = payload.size();
  header["crc32"] = crc32_of(payload);
  const auto header_text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + tmp.string());
    out << kMagic;
    write_u64(out, header_text.size());
    out << header_text << payload;
    out.flush();
    if (!out) fail(ErrorCode::UnreadableFile, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainingState load_checkpoint(const std::filesystem::path& path, std::optional<Preset> expected_preset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open " + path.string());
  if (read_exact(in, kMagic.size(), "checkpoint magic") != kMagic) {
    fail(ErrorCode::CorruptFile, path.string() + " is not a checkpoint");
  }
  const auto header_size = read_u64(in);
  if (header_size > (1u << 26)) fail(ErrorCode::CorruptFile, "implausible checkpoint header size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_exact(in, header_size, "checkpoint header"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("checkpoint header: ") + e.what());
  }

  std::string version, config_text;
  NormStats norm;
  std::int64_t step = 0;
  std::uint64_t payload_bytes = 0;
  std::uint32_t crc = 0;
  try {
    version = header.at("version").get<std::string>();
    config_text = header.at("config").get<std::string>();
    norm.mean = header.at("norm").at("mean").get<double>();
    norm.std = header.at("norm").at("std").get<double>();
    step = header.at("step").get<std::int64_t>();
    payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
    crc = header.at("crc32").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("checkpoint header: ") + e.what());
  }
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch, "checkpoint format " + version + ", expected " + kCheckpointVersion);
  }

  const auto payload = read_exact(in, payload_bytes, "checkpoint payload");
  if (crc32_of(payload) != crc) fail(ErrorCode::CorruptFile, "checkpoint checksum mismatch");

  auto config = parse_config(config_text);
  if (expected_preset && config.preset != *expected_preset) {
    fail(ErrorCode::VersionMismatch, "checkpoint was trained with preset " + std::string(to_string(config.preset)) +
                                         ", requested " + std::string(to_string(*expected_preset)));
  }

  TrainingState state(config, norm);
  state.step = step;
  try {
    torch::serialize::InputArchive archive;
    std::istringstream payload_stream(payload);
    archive.load_from(payload_stream);
    state.model->load(archive);
    state.optimizers.vae.load(archive, "optim.vae");
    state.optimizers.signal.load(archive, "optim.signal");
  } catch (const c10::Error& e) {
    fail(ErrorCode::CorruptFile, std::string("checkpoint payload: ") + e.what_without_backtrace());
  }
  state.model->eval();
  return state;
}

}  // namespace cosdd
