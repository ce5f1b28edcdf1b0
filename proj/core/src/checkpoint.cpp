#include "falcon/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "falcon/config.hpp"
#include "falcon/error.hpp"

namespace falcon {

using nlohmann::json;

namespace {
constexpr std::string_view kMagic = "FALCONCKPT\n";

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

void put_le64(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

double get_le64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void save_checkpoint(const Model& model, const json& config, const std::filesystem::path& path) {
  save_checkpoint(Checkpoint{{model}, config, 1.0}, path);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.members.empty()) throw ContractError("checkpoint needs at least one model");
  const auto& arch = ckpt.members.front().architecture();
  std::string blob;
  json seeds = json::array();
  for (const auto& m : ckpt.members) {
    if (!(m.architecture() == arch)) throw ContractError("ensemble members must share one architecture");
    seeds.push_back(m.seed());
    for (Scalar v : m.flat_parameters()) put_le64(blob, static_cast<double>(v));
  }
  json header{{"format", "falcon-checkpoint"},
              {"version", kCheckpointVersion},
              {"architecture", to_json(arch)},
              {"member_seeds", seeds},
              {"parameters_per_member", ckpt.members.front().parameter_count()},
              {"temperature", ckpt.temperature},
              {"config", ckpt.config}};
  const std::uint64_t sum = fnv1a64(blob, fnv1a64(header.dump()));
  header["checksum"] = hex64(sum);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << kMagic << text.size() << '\n' << text << blob;
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw FormatError(path.string() + " is not a checkpoint");

  const auto eol = bytes.find('\n', kMagic.size());
  if (eol == std::string::npos) throw IoError(path.string() + ": truncated checkpoint header");
  std::size_t header_size = 0;
  try {
    header_size = std::stoul(bytes.substr(kMagic.size(), eol - kMagic.size()));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad header length");
  }
  if (bytes.size() < eol + 1 + header_size) throw IoError(path.string() + ": truncated checkpoint header");

  json header = json::parse(bytes.substr(eol + 1, header_size), nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("format", "") != "falcon-checkpoint") {
    throw ChecksumError(path.string() + ": checkpoint header is corrupt");
  }
  if (header.value("version", -1) != kCheckpointVersion) {
    throw VersionError(path.string() + ": unsupported checkpoint version " + header.value("version", json()).dump());
  }

  const std::string blob = bytes.substr(eol + 1 + header_size);
  const auto expected = header.value("member_seeds", json::array()).size() * header.value("parameters_per_member", std::size_t{0}) * 8;
  if (blob.size() < expected) throw IoError(path.string() + ": truncated parameter blob");
  const std::string stored = header.value("checksum", "");
  header.erase("checksum");
  if (hex64(fnv1a64(blob, fnv1a64(header.dump()))) != stored) {
    throw ChecksumError(path.string() + ": checksum mismatch");
  }

  Checkpoint ckpt;
  try {
    const Architecture arch = architecture_from_json(header.at("architecture"));
    const auto seeds = header.at("member_seeds").get<std::vector<std::uint64_t>>();
    const auto per_member = header.at("parameters_per_member").get<std::size_t>();
    if (blob.size() != seeds.size() * per_member * 8) throw IoError(path.string() + ": truncated parameter blob");
    for (std::size_t m = 0; m < seeds.size(); ++m) {
      Model model(arch, seeds[m]);
      if (model.parameter_count() != per_member) throw FormatError(path.string() + ": parameter count mismatch");
      std::vector<Scalar> flat(per_member);
      for (std::size_t i = 0; i < per_member; ++i) {
        flat[i] = static_cast<Scalar>(get_le64(blob.data() + (m * per_member + i) * 8));
      }
      model.set_flat_parameters(flat);
      ckpt.members.push_back(std::move(model));
    }
    ckpt.temperature = header.at("temperature").get<double>();
    ckpt.config = header.at("config");
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (ckpt.members.empty()) throw FormatError(path.string() + ": checkpoint holds no models");
  return ckpt;
}

}  // namespace falcon
