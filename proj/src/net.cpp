#include "af/net.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "af/errors.hpp"
#include "af/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

namespace af {

Mlp Mlp::init(std::vector<int> widths, int serve_dim, Rng& rng) {
  if (widths.size() < 2) throw ValidationError("net: need input and output widths");
  for (int w : widths)
    if (w < 1) throw ValidationError("net: widths must be positive");
  Mlp net;
  net.widths_ = std::move(widths);
  net.serve_dim_ = serve_dim;
  for (std::size_t l = 0; l + 1 < net.widths_.size(); ++l) {
    const int in = net.widths_[l], out = net.widths_[l + 1];
    Mat w(out, in);
    const double bound = std::sqrt(6.0 / (in + out));
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    net.weights_.push_back(std::move(w));
    net.biases_.emplace_back(1, out);
  }
  return net;
}

Mlp Mlp::zeros(std::vector<int> widths, int serve_dim) {
  Mlp net;
  net.widths_ = std::move(widths);
  net.serve_dim_ = serve_dim;
  for (std::size_t l = 0; l + 1 < net.widths_.size(); ++l) {
    net.weights_.emplace_back(net.widths_[l + 1], net.widths_[l]);
    net.biases_.emplace_back(1, net.widths_[l + 1]);
  }
  return net;
}

Mlp Mlp::velocity_net(int dim, const std::vector<int>& hidden, Rng& rng) {
  if (hidden.empty()) throw ValidationError("net: hidden widths must be nonempty");
  std::vector<int> widths;
  widths.push_back(dim + 1);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dim);
  Mlp net = init(std::move(widths), dim, rng);
  // zero output layer: a fresh block is exactly the identity map, so training
  // sculpts only the transport it needs instead of first undoing init noise
  net.weights_.back().set_zero();
  return net;
}

Mlp Mlp::scalar_net(int dim, const std::vector<int>& hidden, Rng& rng) {
  if (hidden.empty()) throw ValidationError("net: hidden widths must be nonempty");
  std::vector<int> widths;
  widths.push_back(dim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return init(std::move(widths), dim, rng);
}

void Mlp::forward_batch(const Mat& X, Mat& out) const {
  if (X.cols() != input_dim()) throw ValidationError("net: input width mismatch");
  if (!X.all_finite()) throw ValidationError("net: non-finite input");
  const int n = X.rows();
  Mat cur = X;
  Mat next;
  for (int l = 0; l < layer_count(); ++l) {
    next = Mat(n, widths_[l + 1], kUninit);
    affine_forward(cur, weights_[l], biases_[l], next);
    if (l + 1 < layer_count()) sigmoid_forward(next, next);
    cur = std::move(next);
  }
  out = std::move(cur);
}

void Mlp::forward_batch_xt(const Mat& X, double t, Mat& out) const {
  if (X.cols() + 1 != input_dim()) throw ValidationError("net: input width mismatch");
  if (!X.all_finite() || !std::isfinite(t)) throw ValidationError("net: non-finite input");
  const int n = X.rows();
  Mat cur(n, widths_[1], kUninit);
  affine_xt_forward(X, t, weights_[0], biases_[0], cur);
  if (layer_count() > 1) sigmoid_forward(cur, cur);
  Mat next;
  for (int l = 1; l < layer_count(); ++l) {
    next = Mat(n, widths_[l + 1], kUninit);
    affine_forward(cur, weights_[l], biases_[l], next);
    if (l + 1 < layer_count()) sigmoid_forward(next, next);
    cur = std::move(next);
  }
  out = std::move(cur);
}

void Mlp::eval_xt(std::span<const double> x, double t, std::span<double> out) const {
  Mat X(1, static_cast<int>(x.size()));
  std::memcpy(X.data(), x.data(), x.size() * sizeof(double));
  Mat Y;
  forward_batch_xt(X, t, Y);
  std::memcpy(out.data(), Y.data(), out.size() * sizeof(double));
}

double Mlp::eval_scalar(std::span<const double> x) const {
  Mat X(1, static_cast<int>(x.size()));
  std::memcpy(X.data(), x.data(), x.size() * sizeof(double));
  Mat Y;
  forward_batch(X, Y);
  return Y(0, 0);
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

std::vector<double> Mlp::to_vector() const {
  std::vector<double> out;
  out.reserve(n_params());
  for (int l = 0; l < layer_count(); ++l) {
    out.insert(out.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    out.insert(out.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
  return out;
}

void Mlp::from_vector(std::span<const double> params) {
  if (params.size() != n_params()) throw ValidationError("net: parameter vector size mismatch");
  std::size_t pos = 0;
  for (int l = 0; l < layer_count(); ++l) {
    std::memcpy(weights_[l].data(), params.data() + pos, weights_[l].size() * sizeof(double));
    pos += weights_[l].size();
    std::memcpy(biases_[l].data(), params.data() + pos, biases_[l].size() * sizeof(double));
    pos += biases_[l].size();
  }
}

namespace {

constexpr char kMagic[4] = {'A', 'F', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_u32(std::FILE* f, std::uint32_t v) {
  if (std::fwrite(&v, sizeof(v), 1, f) != 1) throw ValidationError("net: write failed");
}

std::uint32_t read_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, sizeof(v), 1, f) != 1) throw ValidationError("net: truncated file");
  return v;
}

void write_f64(std::FILE* f, const double* p, std::size_t n) {
  if (std::fwrite(p, sizeof(double), n, f) != n) throw ValidationError("net: write failed");
}

void read_f64(std::FILE* f, double* p, std::size_t n) {
  if (std::fread(p, sizeof(double), n, f) != n) throw ValidationError("net: truncated file");
}

}  // namespace

void Mlp::save(const std::filesystem::path& path) const {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw ValidationError("net: cannot open '" + path.string() + "' for writing");
  if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw ValidationError("net: write failed");
  write_u32(f.get(), kVersion);
  write_u32(f.get(), static_cast<std::uint32_t>(serve_dim_));
  write_u32(f.get(), static_cast<std::uint32_t>(widths_.size()));
  for (int w : widths_) write_u32(f.get(), static_cast<std::uint32_t>(w));
  for (int l = 0; l < layer_count(); ++l) {
    write_f64(f.get(), weights_[l].data(), weights_[l].size());
    write_f64(f.get(), biases_[l].data(), biases_[l].size());
  }
}

Mlp Mlp::load(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw ValidationError("net: cannot open '" + path.string() + "'");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("net: '" + path.string() + "' is not a model file");
  const std::uint32_t version = read_u32(f.get());
  if (version != kVersion)
    throw ValidationError("net: unsupported format version " + std::to_string(version));
  Mlp net;
  net.serve_dim_ = static_cast<int>(read_u32(f.get()));
  const std::uint32_t n_widths = read_u32(f.get());
  if (n_widths < 2 || n_widths > 64) throw ValidationError("net: corrupt width count");
  net.widths_.resize(n_widths);
  for (auto& w : net.widths_) {
    w = static_cast<int>(read_u32(f.get()));
    if (w < 1 || w > 1 << 20) throw ValidationError("net: corrupt layer width");
  }
  for (std::size_t l = 0; l + 1 < net.widths_.size(); ++l) {
    Mat w(net.widths_[l + 1], net.widths_[l]);
    Mat b(1, net.widths_[l + 1]);
    read_f64(f.get(), w.data(), w.size());
    read_f64(f.get(), b.data(), b.size());
    net.weights_.push_back(std::move(w));
    net.biases_.push_back(std::move(b));
  }
  return net;
}

}  // namespace af
