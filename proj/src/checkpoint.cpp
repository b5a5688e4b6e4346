#include "pgrec/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pgrec {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  require(in.good(), "checkpoint: truncated file");
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v;
  in.read(reinterpret_cast<char*>(&v), 8);
  require(in.good(), "checkpoint: truncated file");
  return v;
}
std::int32_t get_i32(std::istream& in) {
  std::int32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  require(in.good(), "checkpoint: truncated file");
  return v;
}
double get_f64(std::istream& in) {
  double v;
  in.read(reinterpret_cast<char*>(&v), 8);
  require(in.good(), "checkpoint: truncated file");
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put_i32(out, m.rows);
  put_i32(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
}

Matrix get_matrix(std::istream& in) {
  const int rows = get_i32(in);
  const int cols = get_i32(in);
  require(rows >= 0 && cols >= 0 && static_cast<long long>(rows) * cols < (1LL << 31),
          "checkpoint: corrupt tensor shape");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  require(in.good() || m.size() == 0, "checkpoint: truncated tensor data");
  return m;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  require(len < (1u << 20), "checkpoint: corrupt string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  require(in.good() || len == 0, "checkpoint: truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, ckpt.config_hash);
  put_u64(out, ckpt.seed);

  put_i32(out, ckpt.params.dims.f);
  put_i32(out, ckpt.params.dims.d);
  put_i32(out, ckpt.params.dims.head1);
  put_i32(out, ckpt.params.dims.head2);
  put_f64(out, ckpt.params.dropout_mid);
  put_f64(out, ckpt.params.dropout_last);

  const auto tensors = ckpt.params.all();
  put_u32(out, static_cast<std::uint32_t>(tensors.size() + 4));
  for (const Parameter* p : tensors) {
    put_string(out, p->name);
    put_matrix(out, p->value);
  }
  const auto put_bn = [&](const char* name, const BatchNormState& bn) {
    put_string(out, std::string(name) + "_mean");
    put_matrix(out, bn.running_mean);
    put_string(out, std::string(name) + "_var");
    put_matrix(out, bn.running_var);
  };
  put_bn("bn1", ckpt.params.bn1);
  put_bn("bn2", ckpt.params.bn2);
  put_f64(out, ckpt.params.bn1.momentum);
  put_f64(out, ckpt.params.bn1.eps);

  put_u32(out, ckpt.adam.has_value() ? 1 : 0);
  if (ckpt.adam) {
    const AdamState& a = *ckpt.adam;
    put_f64(out, a.lr);
    put_f64(out, a.beta1);
    put_f64(out, a.beta2);
    put_f64(out, a.eps);
    put_u64(out, static_cast<std::uint64_t>(a.step));
    put_u32(out, static_cast<std::uint32_t>(a.m.size()));
    for (const Matrix& m : a.m) put_matrix(out, m);
    for (const Matrix& m : a.v) put_matrix(out, m);
  }
  put_u64(out, 0x454e44454e44ULL);  // trailer
  require(out.good(), "checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic");
  const std::uint32_t version = get_u32(in);
  require(version == kVersion,
          "checkpoint: version mismatch (file " + std::to_string(version) + ", expected " +
              std::to_string(kVersion) + ")");

  Checkpoint ckpt;
  ckpt.config_hash = get_u64(in);
  ckpt.seed = get_u64(in);
  if (expected_hash && *expected_hash != ckpt.config_hash)
    throw Error("checkpoint: config hash mismatch (file " + std::to_string(ckpt.config_hash) +
                ", expected " + std::to_string(*expected_hash) + ")");

  ModelDims dims;
  dims.f = get_i32(in);
  dims.d = get_i32(in);
  dims.head1 = get_i32(in);
  dims.head2 = get_i32(in);
  ckpt.params.init(dims, 0, 0.9, 1e-5);
  ckpt.params.dropout_mid = get_f64(in);
  ckpt.params.dropout_last = get_f64(in);

  const std::uint32_t tensor_count = get_u32(in);
  auto tensors = ckpt.params.all();
  require(tensor_count == tensors.size() + 4, "checkpoint: tensor count mismatch");
  for (Parameter* p : tensors) {
    const std::string name = get_string(in);
    require(name == p->name, "checkpoint: tensor name mismatch (" + name + " vs " + p->name + ")");
    Matrix m = get_matrix(in);
    require(m.same_shape(p->value), "checkpoint: tensor shape mismatch for " + name);
    p->value = std::move(m);
    p->grad = Matrix(p->value.rows, p->value.cols);
  }
  const auto get_bn = [&](const char* name, BatchNormState& bn) {
    require(get_string(in) == std::string(name) + "_mean", "checkpoint: batch-norm order");
    bn.running_mean = get_matrix(in);
    require(get_string(in) == std::string(name) + "_var", "checkpoint: batch-norm order");
    bn.running_var = get_matrix(in);
  };
  get_bn("bn1", ckpt.params.bn1);
  get_bn("bn2", ckpt.params.bn2);
  const double momentum = get_f64(in);
  const double eps = get_f64(in);
  ckpt.params.bn1.momentum = ckpt.params.bn2.momentum = momentum;
  ckpt.params.bn1.eps = ckpt.params.bn2.eps = eps;

  if (get_u32(in) == 1) {
    AdamState a;
    a.lr = get_f64(in);
    a.beta1 = get_f64(in);
    a.beta2 = get_f64(in);
    a.eps = get_f64(in);
    a.step = static_cast<std::int64_t>(get_u64(in));
    const std::uint32_t count = get_u32(in);
    require(count == tensors.size(), "checkpoint: adam tensor count mismatch");
    a.m.reserve(count);
    a.v.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) a.m.push_back(get_matrix(in));
    for (std::uint32_t i = 0; i < count; ++i) a.v.push_back(get_matrix(in));
    ckpt.adam = std::move(a);
  }
  require(get_u64(in) == 0x454e44454e44ULL, "checkpoint: missing trailer (truncated file)");
  return ckpt;
}

}  // namespace pgrec
