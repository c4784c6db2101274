#include "fld/training/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

#include "fld/common/error.hpp"

namespace fld::training {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kChunk = 64;
}  // namespace

double relative_error(std::span<const double> pred, std::span<const double> target, std::size_t window,
                      std::size_t row_begin, std::size_t row_end) {
  if (pred.size() != target.size()) throw ShapeError("relative_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = row_begin * window; k < row_end * window; ++k) {
    const double e = pred[k] - target[k];
    num += e * e;
    den += target[k] * target[k];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-8);
}

ErrorCurve evaluate_predictor(const std::string& name, const PredictFn& predict, const signal::Trajectory& normalized,
                              std::size_t window, std::size_t max_horizon, std::size_t anchor_stride) {
  if (anchor_stride == 0) throw ConfigError("evaluate_predictor: anchor stride must be positive");
  const std::size_t len = normalized.length();
  if (len < window + max_horizon) {
    throw ConfigError("evaluate_predictor: horizon " + std::to_string(max_horizon) + " with window " + std::to_string(window) +
                      " exceeds the " + std::to_string(len) + "-frame trajectory");
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window + max_horizon <= len; s += anchor_stride) starts.push_back(s);
  const std::size_t d = normalized.state_dim();
  const auto groups = signal::evaluation_groups(d);
  const std::size_t per = d * window;

  ErrorCurve curve;
  curve.model = name;
  curve.error.assign(max_horizon + 1, 0.0);
  curve.group_error.assign(groups.size(), std::vector<double>(max_horizon + 1, 0.0));
  std::vector<bool> supported(max_horizon + 1, true);
  std::vector<double> target(per);
  for (std::size_t c0 = 0; c0 < starts.size(); c0 += kChunk) {
    const std::span<const std::size_t> chunk = std::span(starts).subspan(c0, std::min(kChunk, starts.size() - c0));
    DenseArray current({chunk.size(), d, window});
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      signal::extract_segment_into(normalized, chunk[b], window, {current.ptr() + b * per, per});
    }
    const std::vector<DenseArray> preds = predict(chunk, current, max_horizon);
    if (preds.size() != max_horizon + 1) throw ShapeError("evaluate_predictor: predictor returned the wrong number of horizons");
    for (std::size_t i = 0; i <= max_horizon; ++i) {
      if (preds[i].empty()) {
        supported[i] = false;
        continue;
      }
      if (preds[i].size() != chunk.size() * per) throw ShapeError("evaluate_predictor: prediction shape mismatch");
      for (std::size_t b = 0; b < chunk.size(); ++b) {
        signal::extract_segment_into(normalized, chunk[b] + i, window, target);
        const std::span<const double> p{preds[i].ptr() + b * per, per};
        curve.error[i] += relative_error(p, target, window, 0, d);
        for (std::size_t g = 0; g < groups.size(); ++g) {
          curve.group_error[g][i] += relative_error(p, target, window, groups[g].begin, groups[g].end);
        }
      }
    }
  }
  const double n = static_cast<double>(starts.size());
  for (std::size_t i = 0; i <= max_horizon; ++i) {
    curve.error[i] = supported[i] ? curve.error[i] / n : kNaN;
    for (auto& ge : curve.group_error) ge[i] = supported[i] ? ge[i] / n : kNaN;
  }
  return curve;
}

EvaluationReport evaluate_prediction(std::span<const TrainedModel* const> models, std::span<const std::string> names,
                                     const signal::Trajectory& trajectory, std::size_t max_horizon,
                                     std::size_t anchor_stride) {
  if (models.empty()) throw ConfigError("evaluate_prediction: no models");
  if (names.size() != models.size()) throw ConfigError("evaluate_prediction: one name per model required");
  EvaluationReport report;
  for (std::size_t i = 0; i <= max_horizon; ++i) report.horizons.push_back(i);
  report.groups = signal::evaluation_groups(trajectory.state_dim());
  report.anchor_stride = anchor_stride;
  const std::size_t window = models[0]->window();
  for (std::size_t k = 0; k < models.size(); ++k) {
    const TrainedModel& m = *models[k];
    if (m.window() != window) throw ConfigError("evaluate_prediction: models disagree on the window length");
    if (m.state_dim() != trajectory.state_dim()) throw ShapeError("evaluate_prediction: state dimension mismatch");
    const signal::Trajectory norm = m.normalization.apply(trajectory);
    PredictFn fn = [&m](std::span<const std::size_t>, const DenseArray& current, std::size_t n) {
      return m.predict_horizons(current, n);
    };
    report.curves.push_back(evaluate_predictor(names[k], fn, norm, window, max_horizon, anchor_stride));
  }
  report.anchors = (trajectory.length() - window - max_horizon) / anchor_stride + 1;
  return report;
}

void write_evaluation_csv(std::ostream& out, const EvaluationReport& report) {
  out << "# relative error ||pred - target|| / (||target|| + 1e-8) in normalized units, mean over " << report.anchors
      << " anchors every " << report.anchor_stride << " frames; horizon in frames\n";
  out << "model,horizon,error";
  for (const auto& g : report.groups) out << ',' << g.name;
  out << '\n' << std::setprecision(10);
  for (const ErrorCurve& c : report.curves) {
    for (std::size_t i = 0; i < report.horizons.size(); ++i) {
      if (std::isnan(c.error[i])) continue;
      out << c.model << ',' << report.horizons[i] << ',' << c.error[i];
      for (const auto& ge : c.group_error) out << ',' << ge[i];
      out << '\n';
    }
  }
}

void write_evaluation_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_evaluation_csv(out, report);
}

nlohmann::json evaluation_to_json(const EvaluationReport& report) {
  nlohmann::json j{{"definition", "relative error ||pred - target|| / (||target|| + 1e-8), normalized units"},
                   {"anchors", report.anchors},
                   {"anchor_stride", report.anchor_stride},
                   {"horizons", report.horizons},
                   {"models", nlohmann::json::array()}};
  auto clean = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
    return a;
  };
  for (const ErrorCurve& c : report.curves) {
    nlohmann::json m{{"name", c.model}, {"error", clean(c.error)}, {"groups", nlohmann::json::object()}};
    for (std::size_t g = 0; g < report.groups.size(); ++g) m["groups"][report.groups[g].name] = clean(c.group_error[g]);
    j["models"].push_back(m);
  }
  return j;
}

// ---------------------------------------------------------------------------
// latent traces and manifolds
// ---------------------------------------------------------------------------

LatentTrace trace_latents(const model::FLDModel& model, const signal::NormalizationStats& norm,
                          const signal::Trajectory& trajectory, std::size_t stride) {
  const std::size_t H = model.config().window, c = model.config().channels, d = model.config().state_dim;
  const signal::Trajectory t = norm.apply(trajectory);
  const auto starts = signal::window_starts(t.length(), H, stride);
  LatentTrace trace;
  trace.phi = DenseArray({starts.size(), c});
  trace.theta = DenseArray({starts.size(), 3 * c});
  const std::size_t per = d * H;
  for (std::size_t c0 = 0; c0 < starts.size(); c0 += kChunk) {
    const std::size_t n = std::min(kChunk, starts.size() - c0);
    DenseArray batch({n, d, H});
    for (std::size_t b = 0; b < n; ++b) signal::extract_segment_into(t, starts[c0 + b], H, {batch.ptr() + b * per, per});
    const model::Encoding enc = model.encode_parameters(batch);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t row = c0 + b;
      trace.frame.push_back(starts[row] + H - 1);
      for (std::size_t ch = 0; ch < c; ++ch) {
        trace.phi.at(row, ch) = enc.phi.at(b, ch);
        trace.theta.at(row, ch) = enc.f.at(b, ch);
        trace.theta.at(row, c + ch) = enc.a.at(b, ch);
        trace.theta.at(row, 2 * c + ch) = enc.b.at(b, ch);
      }
    }
  }
  return trace;
}

DenseArray phase_features(const LatentTrace& trace) {
  const std::size_t n = trace.phi.dim(0), c = trace.phi.dim(1);
  DenseArray out({n, 2 * c});
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double a = trace.theta.at(k, c + ch);
      const double ang = 2.0 * std::numbers::pi * trace.phi.at(k, ch);
      out.at(k, 2 * ch) = a * std::sin(ang);
      out.at(k, 2 * ch + 1) = a * std::cos(ang);
    }
  return out;
}

Pca2 fit_pca2(const DenseArray& points) {
  if (points.rank() != 2) throw ShapeError("fit_pca2: points must be n x dims");
  const std::size_t n = points.dim(0), dims = points.dim(1);
  if (n < 3) throw ConfigError("fit_pca2: need at least 3 points");
  Pca2 pca;
  pca.mean.assign(dims, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < dims; ++j) pca.mean[j] += points.at(k, j);
  for (double& m : pca.mean) m /= static_cast<double>(n);
  Eigen::MatrixXd centred(n, dims);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < dims; ++j) centred(k, j) = points.at(k, j) - pca.mean[j];
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n);
  pca.axes = DenseArray({2, dims});
  pca.variance.assign(2, 0.0);
  if (cov.trace() < 1e-24) return pca;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  for (std::size_t a = 0; a < 2 && a < dims; ++a) {
    const Eigen::Index col = static_cast<Eigen::Index>(dims - 1 - a);
    const double var = solver.eigenvalues()(col);
    if (var <= 1e-12 * cov.trace()) continue;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    for (std::size_t j = 0; j < dims; ++j) pca.axes.at(a, j) = v(static_cast<Eigen::Index>(j));
    pca.variance[a] = var;
  }
  return pca;
}

DenseArray project(const Pca2& pca, const DenseArray& points) {
  const std::size_t n = points.dim(0), dims = points.dim(1);
  if (dims != pca.mean.size()) throw ShapeError("project: dimension mismatch");
  DenseArray out({n, 2});
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t a = 0; a < 2; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < dims; ++j) s += (points.at(k, j) - pca.mean[j]) * pca.axes.at(a, j);
      out.at(k, a) = s;
    }
  return out;
}

std::vector<ManifoldPoint> export_latent_manifold(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                                                  bool per_trajectory) {
  if (model.kind() != ModelKind::fld && model.kind() != ModelKind::pae) {
    throw ConfigError("export_latent_manifold: needs an fld or pae model");
  }
  std::vector<LatentTrace> traces;
  std::vector<DenseArray> features;
  std::size_t total = 0;
  for (const auto& t : corpus) {
    traces.push_back(trace_latents(model.fld(), model.normalization, t));
    features.push_back(phase_features(traces.back()));
    total += features.back().dim(0);
  }
  if (total < 3) throw ConfigError("export_latent_manifold: fewer than 3 frames");
  std::vector<ManifoldPoint> out;
  auto emit = [&](std::size_t k, const DenseArray& xy) {
    for (std::size_t r = 0; r < xy.dim(0); ++r) {
      out.push_back({xy.at(r, 0), xy.at(r, 1), k, corpus[k].label, traces[k].frame[r]});
    }
  };
  if (per_trajectory) {
    for (std::size_t k = 0; k < corpus.size(); ++k) emit(k, project(fit_pca2(features[k]), features[k]));
    return out;
  }
  const std::size_t dims = features[0].dim(1);
  DenseArray all({total, dims});
  std::size_t row = 0;
  for (const auto& f : features) {
    std::copy(f.storage().begin(), f.storage().end(), all.storage().begin() + static_cast<long>(row * dims));
    row += f.dim(0);
  }
  const Pca2 pca = fit_pca2(all);
  for (std::size_t k = 0; k < corpus.size(); ++k) emit(k, project(pca, features[k]));
  return out;
}

void write_manifold_csv(std::ostream& out, const std::vector<ManifoldPoint>& points) {
  out << "# first two principal components of per-window phase features (a sin 2 pi phi, a cos 2 pi phi); frame = "
         "newest frame of the window\n";
  out << "x,y,trajectory,label,frame\n" << std::setprecision(10);
  for (const auto& p : points) out << p.x << ',' << p.y << ',' << p.trajectory << ',' << p.label << ',' << p.frame << '\n';
}

double loop_radial_deviation(std::span<const ManifoldPoint> points) {
  if (points.size() < 3) throw ConfigError("loop_radial_deviation: need at least 3 points");
  double cx = 0.0, cy = 0.0;
  for (const auto& p : points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(points.size());
  cy /= static_cast<double>(points.size());
  std::vector<double> r;
  double mean = 0.0;
  for (const auto& p : points) {
    r.push_back(std::hypot(p.x - cx, p.y - cy));
    mean += r.back();
  }
  mean /= static_cast<double>(r.size());
  if (mean <= 0.0) throw NumericError("loop_radial_deviation: all points coincide");
  double worst = 0.0;
  for (double v : r) worst = std::max(worst, std::abs(v - mean));
  return worst / mean;
}

ClusterStats cluster_separation(std::span<const DenseArray> clusters) {
  if (clusters.size() < 2) throw ConfigError("cluster_separation: need at least two clusters");
  const std::size_t dims = clusters[0].dim(1);
  std::vector<std::vector<double>> centroids;
  ClusterStats s;
  for (const DenseArray& c : clusters) {
    if (c.rank() != 2 || c.dim(1) != dims || c.dim(0) == 0) throw ShapeError("cluster_separation: ragged clusters");
    std::vector<double> m(dims, 0.0);
    for (std::size_t k = 0; k < c.dim(0); ++k)
      for (std::size_t j = 0; j < dims; ++j) m[j] += c.at(k, j);
    for (double& v : m) v /= static_cast<double>(c.dim(0));
    double ss = 0.0;
    for (std::size_t k = 0; k < c.dim(0); ++k)
      for (std::size_t j = 0; j < dims; ++j) ss += (c.at(k, j) - m[j]) * (c.at(k, j) - m[j]);
    s.max_within = std::max(s.max_within, std::sqrt(ss / static_cast<double>(c.dim(0))));
    centroids.push_back(std::move(m));
  }
  s.min_between = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centroids.size(); ++a)
    for (std::size_t b = a + 1; b < centroids.size(); ++b) {
      double dd = 0.0;
      for (std::size_t j = 0; j < dims; ++j) dd += (centroids[a][j] - centroids[b][j]) * (centroids[a][j] - centroids[b][j]);
      s.min_between = std::min(s.min_between, std::sqrt(dd));
    }
  return s;
}

QuasiConstancy quasi_constancy_report(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                                      std::size_t stride) {
  if (model.kind() != ModelKind::fld && model.kind() != ModelKind::pae) {
    throw ConfigError("quasi_constancy_report: needs an fld or pae model");
  }
  if (corpus.size() < 2) throw ConfigError("quasi_constancy_report: needs at least two trajectories");
  const std::size_t c = model.settings().fld.channels;
  const std::size_t K = 3 * c;
  std::vector<double> within(K, 0.0), sum(K, 0.0), sumsq(K, 0.0);
  std::size_t pooled = 0;
  for (const auto& t : corpus) {
    const LatentTrace tr = trace_latents(model.fld(), model.normalization, t, stride);
    const std::size_t n = tr.theta.dim(0);
    for (std::size_t k = 0; k < K; ++k) {
      double m = 0.0;
      for (std::size_t r = 0; r < n; ++r) m += tr.theta.at(r, k);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double x = tr.theta.at(r, k);
        v += (x - m) * (x - m);
        sum[k] += x;
      }
      within[k] += std::sqrt(v / static_cast<double>(n));
    }
    pooled += n;
  }
  // Second pass for the pooled variance keeps it numerically stable.
  std::vector<double> pooled_mean(K);
  for (std::size_t k = 0; k < K; ++k) pooled_mean[k] = sum[k] / static_cast<double>(pooled);
  for (const auto& t : corpus) {
    const LatentTrace tr = trace_latents(model.fld(), model.normalization, t, stride);
    for (std::size_t r = 0; r < tr.theta.dim(0); ++r)
      for (std::size_t k = 0; k < K; ++k) {
        const double e = tr.theta.at(r, k) - pooled_mean[k];
        sumsq[k] += e * e;
      }
  }
  QuasiConstancy q;
  q.ratio.assign(3, std::vector<double>(c, kNaN));
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double across = std::sqrt(sumsq[k] / static_cast<double>(pooled));
    if (across < 1e-9) {
      ++q.skipped;
      continue;
    }
    const double ratio = within[k] / static_cast<double>(corpus.size()) / across;
    q.ratio[k / c][k % c] = ratio;
    total += ratio;
    ++used;
  }
  if (used == 0) {
    throw NumericError("quasi_constancy_report: theta does not vary across the corpus (across-corpus std < 1e-9 everywhere)");
  }
  q.mean_ratio = total / static_cast<double>(used);
  return q;
}

}  // namespace fld::training
