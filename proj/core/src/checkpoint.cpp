#include <bit>
#include <cstdint>
#include <fstream>

#include "spl/proto.hpp"

namespace spl::proto {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_f32(std::ofstream& out, double v) {
  const float f = static_cast<float>(v);
  out.write(reinterpret_cast<const char*>(&f), sizeof f);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& file) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::MalformedRecord, file.string() + ": truncated header");
  return v;
}

double get_f32(std::ifstream& in, const std::filesystem::path& file) {
  float f = 0.0f;
  if (!in.read(reinterpret_cast<char*>(&f), sizeof f)) throw Error(ErrorCode::MalformedRecord, file.string() + ": truncated payload");
  return static_cast<double>(f);
}

std::ofstream open_out(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot read " + file.string());
  return in;
}

}  // namespace

void save_prototypes(const std::filesystem::path& file, const PrototypeBank& bank, const MemoryBank* memory) {
  auto out = open_out(file);
  std::uint32_t count = 0;
  if (memory) {
    for (int c = 0; c < memory->num_classes(); ++c) count += static_cast<std::uint32_t>(memory->size(c));
  }
  put_u32(out, static_cast<std::uint32_t>(bank.C));
  put_u32(out, static_cast<std::uint32_t>(bank.K));
  put_u32(out, static_cast<std::uint32_t>(bank.D));
  put_u32(out, count);
  for (double v : bank.P) put_f32(out, v);
  if (memory) {
    for (int c = 0; c < memory->num_classes(); ++c) {
      for (const auto& e : memory->entries(c)) {
        put_f32(out, static_cast<double>(c));
        for (double v : e) put_f32(out, v);
      }
    }
  }
}

PrototypeBank load_prototypes(const std::filesystem::path& file, MemoryBank* memory) {
  auto in = open_in(file);
  const auto C = get_u32(in, file), K = get_u32(in, file), D = get_u32(in, file), count = get_u32(in, file);
  if (C == 0 || K == 0 || D == 0 || C > 1024 || K > 4096 || D > 65536) {
    throw Error(ErrorCode::MalformedRecord, file.string() + ": implausible header");
  }
  PrototypeBank bank(static_cast<int>(C), static_cast<int>(K), static_cast<int>(D));
  for (auto& v : bank.P) v = get_f32(in, file);
  MemoryBank mem(static_cast<int>(C), std::max<std::size_t>(count, memory ? memory->capacity() : 0), static_cast<int>(D));
  std::vector<double> f(D);
  for (std::uint32_t r = 0; r < count; ++r) {
    const int c = static_cast<int>(get_f32(in, file));
    for (auto& v : f) v = get_f32(in, file);
    if (c < 0 || c >= static_cast<int>(C)) throw Error(ErrorCode::MalformedRecord, file.string() + ": bad memory class");
    mem.push(c, f);
  }
  if (memory) *memory = std::move(mem);
  return bank;
}

void save_head(const std::filesystem::path& file, const ProjectionHead& head, std::span<const double> cls_weight,
               std::span<const double> cls_bias) {
  auto out = open_out(file);
  put_u32(out, static_cast<std::uint32_t>(head.d_in));
  put_u32(out, static_cast<std::uint32_t>(head.d_out));
  for (double v : head.weight) put_f32(out, v);
  for (double v : head.bias) put_f32(out, v);
  put_u32(out, static_cast<std::uint32_t>(cls_bias.size()));
  for (double v : cls_weight) put_f32(out, v);
  for (double v : cls_bias) put_f32(out, v);
}

ProjectionHead load_head(const std::filesystem::path& file, std::vector<double>* cls_weight,
                         std::vector<double>* cls_bias) {
  auto in = open_in(file);
  const auto din = get_u32(in, file), dout = get_u32(in, file);
  if (din == 0 || dout == 0 || din > 65536 || dout > 65536) throw Error(ErrorCode::MalformedRecord, file.string() + ": implausible header");
  ProjectionHead head(static_cast<int>(din), static_cast<int>(dout));
  for (auto& v : head.weight) v = get_f32(in, file);
  for (auto& v : head.bias) v = get_f32(in, file);
  const auto C = get_u32(in, file);
  std::vector<double> w(static_cast<std::size_t>(dout) * C), b(C);
  for (auto& v : w) v = get_f32(in, file);
  for (auto& v : b) v = get_f32(in, file);
  if (cls_weight) *cls_weight = std::move(w);
  if (cls_bias) *cls_bias = std::move(b);
  return head;
}

}  // namespace spl::proto
