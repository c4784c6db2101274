#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fld/signal/trajectory.hpp"
#include "fld/training/trained_model.hpp"

namespace fld::training {

/// Relative error ||pred - target|| / (||target|| + 1e-8) over the rows
/// [row_begin, row_end) of a d x H segment.
double relative_error(std::span<const double> pred, std::span<const double> target, std::size_t window,
                      std::size_t row_begin, std::size_t row_end);

/// Predictions for horizons 0..max_horizon from a batch of normalized
/// segments taken at the given anchor starts. An empty array marks a horizon
/// the predictor does not support.
using PredictFn = std::function<std::vector<DenseArray>(std::span<const std::size_t> starts, const DenseArray& current,
                                                        std::size_t max_horizon)>;

struct ErrorCurve {
  std::string model;
  std::vector<double> error;                      // per horizon, all dimensions
  std::vector<std::vector<double>> group_error;   // [group][horizon]
};

struct EvaluationReport {
  std::vector<std::size_t> horizons;
  std::vector<signal::DimensionGroup> groups;
  std::vector<ErrorCurve> curves;
  std::size_t anchors = 0;
  std::size_t anchor_stride = 5;
};

/// Error curve of one predictor on a normalized trajectory, averaged over
/// anchors every `anchor_stride` frames. Unsupported horizons are NaN.
ErrorCurve evaluate_predictor(const std::string& name, const PredictFn& predict, const signal::Trajectory& normalized,
                              std::size_t window, std::size_t max_horizon, std::size_t anchor_stride = 5);

/// Each model normalizes the raw trajectory with its own statistics.
EvaluationReport evaluate_prediction(std::span<const TrainedModel* const> models, std::span<const std::string> names,
                                     const signal::Trajectory& trajectory, std::size_t max_horizon,
                                     std::size_t anchor_stride = 5);

/// model,horizon,error,<group columns>
void write_evaluation_csv(std::ostream& out, const EvaluationReport& report);
void write_evaluation_csv(const std::filesystem::path& path, const EvaluationReport& report);
nlohmann::json evaluation_to_json(const EvaluationReport& report);

// ---------------------------------------------------------------------------
// latent features along trajectories
// ---------------------------------------------------------------------------

/// Eval-mode encoding of every window of a raw trajectory; row k belongs to
/// the window ending at frame `frame[k]`.
struct LatentTrace {
  std::vector<std::size_t> frame;
  DenseArray phi;    // windows x c
  DenseArray theta;  // windows x 3c, (f, a, b) blocks
};
LatentTrace trace_latents(const model::FLDModel& model, const signal::NormalizationStats& norm,
                          const signal::Trajectory& trajectory, std::size_t stride = 1);

/// (a sin 2 pi phi, a cos 2 pi phi) per channel -> windows x 2c.
DenseArray phase_features(const LatentTrace& trace);

struct Pca2 {
  std::vector<double> mean;
  DenseArray axes;  // 2 x dims
  std::vector<double> variance;
};

/// Two leading principal axes; sign fixed so each axis' largest-magnitude
/// loading is positive. Degenerate data gives zero axes.
Pca2 fit_pca2(const DenseArray& points);
DenseArray project(const Pca2& pca, const DenseArray& points);

struct ManifoldPoint {
  double x = 0.0;
  double y = 0.0;
  std::size_t trajectory = 0;
  std::string label;
  std::size_t frame = 0;
};

/// Phase-feature PCA over every window of every trajectory. With
/// `per_trajectory` set each trajectory gets its own PCA instead of one fit
/// on all points.
std::vector<ManifoldPoint> export_latent_manifold(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                                                  bool per_trajectory = false);
void write_manifold_csv(std::ostream& out, const std::vector<ManifoldPoint>& points);

/// Max |r - mean r| / mean r of 2-D points about their centroid.
double loop_radial_deviation(std::span<const ManifoldPoint> points);

struct ClusterStats {
  double min_between = 0.0;  // smallest distance between two centroids
  double max_within = 0.0;   // largest RMS distance to own centroid
};
/// Clusters given as rows of equal-width feature matrices.
ClusterStats cluster_separation(std::span<const DenseArray> clusters);

// ---------------------------------------------------------------------------
// quasi-constancy of theta
// ---------------------------------------------------------------------------

struct QuasiConstancy {
  /// [component][channel], component 0 = f, 1 = a, 2 = b. NaN where the
  /// across-corpus std is below 1e-9 (skipped).
  std::vector<std::vector<double>> ratio;
  double mean_ratio = 0.0;
  std::size_t skipped = 0;
};

/// Within-trajectory std of each theta entry (averaged over trajectories)
/// over its std pooled across all windows of the corpus.
QuasiConstancy quasi_constancy_report(const TrainedModel& model, std::span<const signal::Trajectory> corpus,
                                      std::size_t stride = 1);

}  // namespace fld::training
