#include "sdrl/checkpoint.hpp"

#include <cmath>
#include <stdexcept>

namespace sdrl {

namespace {

void w64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t r64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_f64(std::ostream& os, const Tensor2& t) {
  for (real v : t.data) {
    const double d = static_cast<double>(v);
    os.write(reinterpret_cast<const char*>(&d), sizeof(d));
  }
}

void read_f64(std::istream& is, Tensor2& t) {
  for (real& v : t.data) {
    double d = 0;
    is.read(reinterpret_cast<char*>(&d), sizeof(d));
    v = static_cast<real>(d);
  }
}

}  // namespace

void write_param_fragment(std::ostream& os, const MaskedParameter& p) {
  w64(os, p.name.size());
  os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
  w64(os, p.weight.rows);
  w64(os, p.weight.cols);
  write_f64(os, p.weight);
  const std::size_t n = p.weight.size();
  std::vector<std::uint8_t> bits((n + 7) / 8, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (p.mask.data[i] != 0) bits[i / 8] |= std::uint8_t(1u << (i % 8));
  os.write(reinterpret_cast<const char*>(bits.data()),
           static_cast<std::streamsize>(bits.size()));
  write_f64(os, p.m1);
  write_f64(os, p.m2);
  w64(os, p.step_count);
  const std::uint8_t sp = p.sparsifiable ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&sp), sizeof(sp));
}

MaskedParameter read_param_fragment(std::istream& is) {
  const std::uint64_t name_len = r64(is);
  std::string name(name_len, '\0');
  is.read(name.data(), static_cast<std::streamsize>(name_len));
  const std::size_t rows = r64(is);
  const std::size_t cols = r64(is);
  MaskedParameter p(std::move(name), rows, cols);
  read_f64(is, p.weight);
  const std::size_t n = rows * cols;
  std::vector<std::uint8_t> bits((n + 7) / 8, 0);
  is.read(reinterpret_cast<char*>(bits.data()),
          static_cast<std::streamsize>(bits.size()));
  for (std::size_t i = 0; i < n; ++i)
    p.mask.data[i] = (bits[i / 8] >> (i % 8)) & 1 ? 1 : 0;
  read_f64(is, p.m1);
  read_f64(is, p.m2);
  p.step_count = r64(is);
  std::uint8_t sp = 0;
  is.read(reinterpret_cast<char*>(&sp), sizeof(sp));
  p.sparsifiable = sp != 0;
  if (!is) throw std::runtime_error("truncated parameter fragment");
  return p;
}

void read_param_fragment_into(std::istream& is, MaskedParameter& p) {
  MaskedParameter q = read_param_fragment(is);
  if (q.name != p.name)
    throw std::runtime_error("fragment name mismatch: expected " + p.name +
                             ", got " + q.name);
  if (q.weight.rows != p.weight.rows || q.weight.cols != p.weight.cols)
    throw std::runtime_error("fragment shape mismatch for " + p.name);
  q.sparsifiable = p.sparsifiable;
  p = std::move(q);
}

void write_checkpoint_header(std::ostream& os, const CheckpointHeader& h) {
  const char magic[8] = {'s', 'd', 'r', 'l', 'c', 'k', 'p', 't'};
  os.write(magic, sizeof(magic));
  os.write(reinterpret_cast<const char*>(&h.version), sizeof(h.version));
  w64(os, h.config_hash);
  w64(os, h.step);
}

CheckpointHeader read_checkpoint_header(std::istream& is) {
  char magic[8] = {};
  is.read(magic, sizeof(magic));
  if (std::string(magic, 8) != "sdrlckpt")
    throw std::runtime_error("not a checkpoint file");
  CheckpointHeader h;
  is.read(reinterpret_cast<char*>(&h.version), sizeof(h.version));
  if (h.version != 1)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(h.version));
  h.config_hash = r64(is);
  h.step = r64(is);
  return h;
}

}  // namespace sdrl
