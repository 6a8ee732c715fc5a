#include "cartwin/drl/policy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace cartwin {

namespace {

constexpr char kMagic[8] = {'C', 'W', 'P', 'O', 'L', 'I', 'C', 'Y'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_tensor(std::ostream& out, const float* data, std::uint32_t rows,
                  std::uint32_t cols) {
  write_u32(out, rows);
  write_u32(out, cols);
  for (std::uint32_t i = 0; i < rows * cols; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, data + i, 4);
    write_u32(out, bits);
  }
}

void read_tensor(std::istream& in, float* data, std::uint32_t rows,
                 std::uint32_t cols) {
  const std::uint32_t r = read_u32(in);
  const std::uint32_t c = read_u32(in);
  if (r != rows || c != cols) {
    throw std::invalid_argument("policy file: tensor shape mismatch");
  }
  for (std::uint32_t i = 0; i < rows * cols; ++i) {
    const std::uint32_t bits = read_u32(in);
    std::memcpy(data + i, &bits, 4);
  }
}

}  // namespace

double Policy::act(const Eigen::Vector4d& raw_errors) const {
  const Eigen::Vector4d normalized = raw_errors.cwiseQuotient(obs_norm);
  MatX<float> obs(4, 1);
  for (int i = 0; i < 4; ++i) obs(i, 0) = static_cast<float>(normalized(i));
  const MatX<float> u = actor->forward(obs);
  return delta_dot_max * static_cast<double>(u(0, 0));
}

void export_policy(const Policy& policy, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write policy file: " + file);
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  const auto& a = *policy.actor;
  write_u32(out, static_cast<std::uint32_t>(a.l1.w.cols()));  // n_obs
  write_u32(out, static_cast<std::uint32_t>(a.l1.w.rows()));  // hidden
  write_f64(out, policy.delta_dot_max);
  for (int i = 0; i < 4; ++i) write_f64(out, policy.obs_norm(i));
  for (const auto* layer : {&a.l1, &a.l2, &a.l3}) {
    write_tensor(out, layer->w.data(), static_cast<std::uint32_t>(layer->w.rows()),
                 static_cast<std::uint32_t>(layer->w.cols()));
    write_tensor(out, layer->b.data(), static_cast<std::uint32_t>(layer->b.size()),
                 1);
  }
}

Policy load_policy(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::invalid_argument("policy file not found: " + file);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::invalid_argument("policy file: bad magic");
  }
  if (read_u32(in) != kVersion) {
    throw std::invalid_argument("policy file: unsupported version");
  }
  const std::uint32_t n_obs = read_u32(in);
  const std::uint32_t hidden = read_u32(in);
  if (n_obs != 4 || hidden == 0 || hidden > 100000) {
    throw std::invalid_argument("policy file: bad dimensions");
  }
  Policy p;
  p.delta_dot_max = read_f64(in);
  for (int i = 0; i < 4; ++i) p.obs_norm(i) = read_f64(in);
  RngStream rng(0);
  p.actor = std::make_shared<ActorNet<float>>(n_obs, hidden, rng);
  auto& a = *p.actor;
  read_tensor(in, a.l1.w.data(), hidden, n_obs);
  read_tensor(in, a.l1.b.data(), hidden, 1);
  read_tensor(in, a.l2.w.data(), hidden, hidden);
  read_tensor(in, a.l2.b.data(), hidden, 1);
  read_tensor(in, a.l3.w.data(), 1, hidden);
  read_tensor(in, a.l3.b.data(), 1, 1);
  if (!in) throw std::invalid_argument("policy file: truncated");
  return p;
}

}  // namespace cartwin
