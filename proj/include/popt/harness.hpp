#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "popt/grid.hpp"

// CLI support: image metrics, PGM I/O, line-based configuration, metrics CSV,
// and the bounded producer/consumer queue.

namespace popt::harness {

using grid::Image;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 10*log10(1/MSE) for unit-range images; identical images report 99.0 dB.
double psnr(const Image& a, const Image& ref);

// Mean SSIM map: 11x11 Gaussian window (std 1.5), k1=0.01, k2=0.03, dynamic
// range 1, replicate border. Requires min dimension >= 11.
double ssim(const Image& a, const Image& ref);

// Binary 8-bit PGM (P5). Stored intensities are clamped to [0,1] and
// quantized by round(v*255); loading maps byte v to v/255.
Image load_pgm(const std::string& path);
void save_pgm(const Image& img, const std::string& path);
Image load_image(const std::string& path);  // dispatches on extension (PGM; PNG when enabled)

// metrics.csv row; schema: k,objective,psnr,ssim,psnr_data,ssim_data,pred_residual,ms
struct MetricsRecord {
  long k = 0;
  double objective = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double psnr_data = 0.0;
  double ssim_data = 0.0;
  double pred_residual = 0.0;
  double ms = 0.0;
};

extern const char* kMetricsHeader;
std::string format_metrics_row(const MetricsRecord& r);

// Line-based "key = value" configuration with [section] headers and '#'
// comments. Keys are flattened to "section.key".
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  long get(const std::string& key, long fallback) const;
  bool get(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Validated experiment description; mirrors the CLI flags.
struct ExperimentConfig {
  std::string mode = "popd-known";  // pofb | popd-known | popd-unknown | diagnostics
  // scene
  std::string source_path;  // empty: procedural test chart
  int source_height = 768, source_width = 512;
  int crop_height = 64, crop_width = 64;
  double brown_std = 2.0;
  double image_noise = 0.5;
  double disp_noise = 0.05;
  std::uint64_t seed = 1;
  long frames = 300;
  // model
  double alpha = 1.0;
  // steps
  double tau = 0.01, kappa = 0.9, gamma = 1.0, rho = 0.0, Lambda = 1.0, Theta = 1.0,
         knorm_sq = 8.0;
  int fista_iters = 10;
  // displacement estimation
  double theta_scale = 1e6;  // theta = H*W*theta_scale
  double lambda1 = 1.0;
  double T = 0.5;
  int window = 100;
  double kernel_std = 3.0;
  int kernel_window = 11;
  // output
  std::string outdir = "out";
  std::vector<long> dump_frames = {30, 50, 100, 300, 500, 1000, 3000};
  bool timing = true;  // when false the ms column is written as 0 (reproducible output)

  static ExperimentConfig from_map(const ConfigMap& m);
  void validate() const;
  std::string snapshot() const;  // config file round-trippable text
};

// Fixed-capacity producer/consumer queue.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t cap) : cap_(cap) {}

  void push(T v) {
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] { return q_.size() < cap_ || closed_; });
    if (closed_) return;
    q_.push_back(std::move(v));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lk(mu_);
    not_empty_.wait(lk, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t cap_;
  std::deque<T> q_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
};

}  // namespace popt::harness
