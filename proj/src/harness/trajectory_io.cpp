#include "ldc/harness/trajectory_io.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "ldc/harness/spec.hpp"

namespace ldc::harness {

std::vector<std::string> trajectory_columns(int tasks, int dim) {
  std::vector<std::string> cols{"step"};
  for (const char* prefix : {"l", "nl", "sigma", "b"}) {
    for (int i = 1; i <= tasks; ++i) cols.push_back(prefix + std::to_string(i));
  }
  for (int j = 1; j <= dim; ++j) cols.push_back("x" + std::to_string(j));
  for (int i = 1; i <= tasks; ++i) cols.push_back("w" + std::to_string(i));
  for (const char* c : {"f", "g", "phi", "residual", "gwg_norm", "gwg_zn_norm", "norm_ratio",
                        "norm_ratio_capped", "diverged", "step_micros"}) {
    cols.emplace_back(c);
  }
  return cols;
}

std::filesystem::path meta_path(const std::filesystem::path& trajectory) {
  std::filesystem::path p = trajectory;
  p.replace_extension(".meta.json");
  return p;
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, int tasks, int dim)
    : out_(path), path_(path), tasks_(tasks), dim_(dim) {
  if (!out_) throw ConfigError("cannot write trajectory file " + path.string());
  const auto cols = trajectory_columns(tasks, dim);
  for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
  out_ << "\n";
}

void TrajectoryWriter::write(const TrajectoryRecord& r) {
  std::string line = std::to_string(r.step);
  auto put = [&](double v) {
    line += ',';
    line += format_double(v);
  };
  auto put_vec = [&](const Vector& v, int n) {
    for (int i = 0; i < n; ++i) put(i < v.size() ? v[i] : 0.0);
  };
  put_vec(r.raw_losses, tasks_);
  put_vec(r.normalized_losses, tasks_);
  put_vec(r.sigma, tasks_);
  put_vec(r.baseline, tasks_);
  put_vec(r.x, dim_);
  put_vec(r.logits, tasks_);
  put(r.f);
  put(r.g);
  put(r.phi);
  put(r.residual);
  put(r.grad_w_g_norm);
  line += ',';
  if (r.grad_w_g_zn_norm) line += format_double(*r.grad_w_g_zn_norm);
  put(r.norm_ratio);
  line += r.norm_ratio_capped ? ",1" : ",0";
  line += r.diverged ? ",1" : ",0";
  put(r.step_micros);
  out_ << line << '\n';
}

void TrajectoryWriter::close() {
  out_.close();
  if (out_.fail()) throw ConfigError("failed writing trajectory file " + path_.string());
}

namespace {

double cell(const std::string& s, const std::filesystem::path& path, int line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": bad numeric cell '" + s + "'");
  }
  return v;
}

}  // namespace

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file " + path.string());
  Trajectory t;
  t.path = path;
  t.name = path.stem().string();

  std::string header;
  if (!std::getline(in, header)) throw ConfigError(path.string() + ": empty file");
  std::vector<std::string> cols;
  {
    std::istringstream hs(header);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  for (const auto& c : cols) {
    if (c.size() > 1 && c[0] == 'l' && std::isdigit(static_cast<unsigned char>(c[1]))) ++t.tasks;
    if (c.size() > 1 && c[0] == 'x' && std::isdigit(static_cast<unsigned char>(c[1]))) ++t.dim;
  }
  if (t.tasks < 1 || cols != trajectory_columns(t.tasks, t.dim)) {
    throw ConfigError(path.string() + ": unrecognized trajectory header");
  }

  std::string line;
  int line_no = 1;
  const int k = t.tasks;
  const int d = t.dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) f.push_back(c);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != cols.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(cols.size()) + " cells");
    }
    TrajectoryRecord r;
    std::size_t at = 0;
    r.step = static_cast<long>(cell(f[at++], path, line_no));
    auto vec = [&](int n) {
      Vector v(n);
      for (int i = 0; i < n; ++i) v[i] = cell(f[at++], path, line_no);
      return v;
    };
    r.raw_losses = vec(k);
    r.normalized_losses = vec(k);
    r.sigma = vec(k);
    r.baseline = vec(k);
    r.x = vec(d);
    r.logits = vec(k);
    r.f = cell(f[at++], path, line_no);
    r.g = cell(f[at++], path, line_no);
    r.phi = cell(f[at++], path, line_no);
    r.residual = cell(f[at++], path, line_no);
    r.grad_w_g_norm = cell(f[at++], path, line_no);
    if (!f[at].empty()) r.grad_w_g_zn_norm = cell(f[at], path, line_no);
    ++at;
    r.norm_ratio = cell(f[at++], path, line_no);
    r.norm_ratio_capped = cell(f[at++], path, line_no) != 0.0;
    r.diverged = cell(f[at++], path, line_no) != 0.0;
    r.step_micros = cell(f[at++], path, line_no);
    t.rows.push_back(std::move(r));
  }

  const auto mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    std::ifstream m(mp);
    try {
      t.meta = nlohmann::json::parse(m);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(mp.string() + ": " + e.what());
    }
  }
  return t;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace ldc::harness
