#include "popt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace popt::harness {

double psnr(const Image& a, const Image& ref) {
  if (!a.same_shape(ref)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t t = 0; t < a.data.size(); ++t) {
    const double d = a.data[t] - ref.data[t];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

Image gauss_filter_11(const Image& img) {
  // fixed 11x11 separable Gaussian, std 1.5, replicate border
  static const std::vector<double> k = [] {
    std::vector<double> v(11);
    double s = 0.0;
    for (int t = -5; t <= 5; ++t) {
      v[t + 5] = std::exp(-0.5 * t * t / (1.5 * 1.5));
      s += v[t + 5];
    }
    for (double& x : v) x /= s;
    return v;
  }();
  const int h = img.height, w = img.width;
  Image tmp(h, w), out(h, w);
  auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -5; t <= 5; ++t) acc += k[t + 5] * img.at(cl(i + t, h - 1), j);
      tmp.at(i, j) = acc;
    }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -5; t <= 5; ++t) acc += k[t + 5] * tmp.at(i, cl(j + t, w - 1));
      out.at(i, j) = acc;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& ref) {
  if (!a.same_shape(ref)) throw std::invalid_argument("ssim: shape mismatch");
  if (std::min(a.height, a.width) < 11) throw std::invalid_argument("ssim: image smaller than the window");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  Image aa(a.height, a.width), rr(a.height, a.width), ar(a.height, a.width);
  for (std::size_t t = 0; t < a.data.size(); ++t) {
    aa.data[t] = a.data[t] * a.data[t];
    rr.data[t] = ref.data[t] * ref.data[t];
    ar.data[t] = a.data[t] * ref.data[t];
  }
  const Image mu_a = gauss_filter_11(a);
  const Image mu_r = gauss_filter_11(ref);
  const Image m_aa = gauss_filter_11(aa);
  const Image m_rr = gauss_filter_11(rr);
  const Image m_ar = gauss_filter_11(ar);

  double acc = 0.0;
  for (std::size_t t = 0; t < a.data.size(); ++t) {
    const double ma = mu_a.data[t], mr = mu_r.data[t];
    const double va = m_aa.data[t] - ma * ma;
    const double vr = m_rr.data[t] - mr * mr;
    const double cov = m_ar.data[t] - ma * mr;
    acc += ((2.0 * ma * mr + c1) * (2.0 * cov + c2)) /
           ((ma * ma + mr * mr + c1) * (va + vr + c2));
  }
  return acc / static_cast<double>(a.data.size());
}

Image load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_pgm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw IoError("load_pgm: " + path + ": expected P5 magic at offset 0");
  auto next_token = [&](const char* what) {
    // skip whitespace and comments
    int c = f.get();
    while (c == '#' || std::isspace(c)) {
      if (c == '#')
        while (c != '\n' && c != EOF) c = f.get();
      c = f.get();
    }
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      c = f.get();
    }
    if (tok.empty())
      throw IoError(std::string("load_pgm: ") + path + ": missing " + what + " near offset " +
                               std::to_string(static_cast<long>(f.tellg())));
    return tok;
  };
  long w, h, maxv;
  try {
    w = std::stol(next_token("width"));
    h = std::stol(next_token("height"));
    maxv = std::stol(next_token("maxval"));
  } catch (const std::invalid_argument&) {
    throw IoError("load_pgm: " + path + ": malformed header field");
  }
  if (w <= 0 || h <= 0 || maxv != 255)
    throw IoError("load_pgm: " + path + ": unsupported header (need maxval 255)");
  Image img(static_cast<int>(h), static_cast<int>(w));
  std::vector<unsigned char> buf(img.size());
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw IoError("load_pgm: " + path + ": truncated pixel data");
  for (std::size_t t = 0; t < buf.size(); ++t) img.data[t] = buf[t] / 255.0;
  return img;
}

void save_pgm(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_pgm: cannot open " + path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.size());
  for (std::size_t t = 0; t < img.size(); ++t) {
    const double v = std::clamp(img.data[t], 0.0, 1.0);
    buf[t] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("save_pgm: write failed for " + path);
}

#ifdef POPT_WITH_PNG
Image load_png_gray(const std::string& path);
#endif

Image load_image(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".pgm") return load_pgm(path);
#ifdef POPT_WITH_PNG
  if (ext == ".png") return load_png_gray(path);
#endif
  throw IoError("load_image: unsupported format: " + path);
}

const char* kMetricsHeader = "k,objective,psnr,ssim,psnr_data,ssim_data,pred_residual,ms";

std::string format_metrics_row(const MetricsRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%.10g,%.6f,%.6f,%.6f,%.6f,%.10g,%.4f", r.k, r.objective,
                r.psnr, r.ssim, r.psnr_data, r.ssim_data, r.pred_residual, r.ms);
  return buf;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

ConfigMap ConfigMap::parse_string(const std::string& text) {
  ConfigMap m;
  std::istringstream in(text);
  std::string line, section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: bad section at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: missing '=' at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
    m.entries_[section.empty() ? key : section + "." + key] = val;
  }
  return m;
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string ConfigMap::get(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double ConfigMap::get(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return std::stod(it->second);
}

long ConfigMap::get(const std::string& key, long fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return std::stol(it->second);
}

bool ConfigMap::get(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return it->second == "on" || it->second == "true" || it->second == "1";
}

void ConfigMap::set(const std::string& key, const std::string& value) { entries_[key] = value; }

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& m) {
  ExperimentConfig c;
  c.mode = m.get("mode", c.mode);
  c.source_path = m.get("scene.source", c.source_path);
  c.source_height = static_cast<int>(m.get("scene.source_height", static_cast<long>(c.source_height)));
  c.source_width = static_cast<int>(m.get("scene.source_width", static_cast<long>(c.source_width)));
  c.crop_height = static_cast<int>(m.get("scene.height", static_cast<long>(c.crop_height)));
  c.crop_width = static_cast<int>(m.get("scene.width", static_cast<long>(c.crop_width)));
  c.brown_std = m.get("scene.brown_std", c.brown_std);
  c.image_noise = m.get("scene.noise", c.image_noise);
  c.disp_noise = m.get("scene.disp_noise", c.disp_noise);
  c.seed = static_cast<std::uint64_t>(m.get("scene.seed", static_cast<long>(c.seed)));
  c.frames = m.get("scene.frames", c.frames);
  c.alpha = m.get("model.alpha", c.alpha);
  c.tau = m.get("steps.tau", c.tau);
  c.kappa = m.get("steps.kappa", c.kappa);
  c.gamma = m.get("steps.gamma", c.gamma);
  c.rho = m.get("steps.rho", c.rho);
  c.Lambda = m.get("steps.Lambda", c.Lambda);
  c.Theta = m.get("steps.Theta", c.Theta);
  c.knorm_sq = m.get("steps.knorm_sq", c.knorm_sq);
  c.fista_iters = static_cast<int>(m.get("steps.fista_iters", static_cast<long>(c.fista_iters)));
  c.theta_scale = m.get("flow.theta_scale", c.theta_scale);
  c.lambda1 = m.get("flow.lambda1", c.lambda1);
  c.T = m.get("flow.T", c.T);
  c.window = static_cast<int>(m.get("flow.window", static_cast<long>(c.window)));
  c.kernel_std = m.get("flow.kernel_std", c.kernel_std);
  c.kernel_window = static_cast<int>(m.get("flow.kernel_window", static_cast<long>(c.kernel_window)));
  c.outdir = m.get("output.dir", c.outdir);
  c.timing = m.get("output.timing", c.timing);
  if (m.has("output.dump_frames")) {
    c.dump_frames.clear();
    std::istringstream in(m.get("output.dump_frames", std::string()));
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!tok.empty()) c.dump_frames.push_back(std::stol(tok));
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (mode != "pofb" && mode != "popd-known" && mode != "popd-unknown" && mode != "diagnostics")
    throw ConfigError("config: unknown mode '" + mode + "'");
  if (crop_height < 2 || crop_width < 2) throw ConfigError("config: crop too small");
  if (frames < 1) throw ConfigError("config: frames must be >= 1");
  if (image_noise < 0 || disp_noise < 0 || brown_std < 0)
    throw ConfigError("config: negative noise parameter");
  if (!(alpha > 0)) throw ConfigError("config: alpha must be > 0");
}

std::string ExperimentConfig::snapshot() const {
  std::ostringstream o;
  o << "mode = " << mode << "\n\n[scene]\n";
  if (!source_path.empty()) o << "source = " << source_path << "\n";
  o << "source_height = " << source_height << "\nsource_width = " << source_width << "\n";
  o << "height = " << crop_height << "\nwidth = " << crop_width << "\n";
  o << "brown_std = " << brown_std << "\nnoise = " << image_noise << "\ndisp_noise = " << disp_noise
    << "\n";
  o << "seed = " << seed << "\nframes = " << frames << "\n";
  o << "\n[model]\nalpha = " << alpha << "\n";
  o << "\n[steps]\ntau = " << tau << "\nkappa = " << kappa << "\ngamma = " << gamma
    << "\nrho = " << rho << "\nLambda = " << Lambda << "\nTheta = " << Theta
    << "\nknorm_sq = " << knorm_sq << "\nfista_iters = " << fista_iters << "\n";
  o << "\n[flow]\ntheta_scale = " << theta_scale << "\nlambda1 = " << lambda1 << "\nT = " << T
    << "\nwindow = " << window << "\nkernel_std = " << kernel_std
    << "\nkernel_window = " << kernel_window << "\n";
  o << "\n[output]\ndir = " << outdir << "\ntiming = " << (timing ? "on" : "off") << "\n";
  o << "dump_frames = ";
  for (std::size_t i = 0; i < dump_frames.size(); ++i) o << (i ? "," : "") << dump_frames[i];
  o << "\n# ssim: 11x11 gaussian window std 1.5, k1 0.01, k2 0.03, range 1.0\n";
  return o.str();
}

}  // namespace popt::harness
