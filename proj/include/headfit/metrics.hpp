/*
 * headfit - pin-based 3D head model fitting and evaluation.
 *
 * Copyright 2026 The headfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "headfit/annotation.hpp"
#include "headfit/camera.hpp"
#include "headfit/morphable.hpp"
#include "headfit/rotations.hpp"
#include "headfit/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace headfit {

/// sqrt(w * h), the head-size normalizer.
double bbox_size(const BBox& bbox);

/**
 * Mean Euclidean distance (px) between corresponding landmarks, divided by
 * bbox_size(). Throws DimensionMismatch when the arrays differ in length or
 * are empty, DegenerateInput for a non-positive box.
 */
double reprojection_nme(const Points2D& pred, const Points2D& gt, const BBox& bbox);

/**
 * Ordinal depth accuracy. For every GT vertex i its n nearest GT vertices j
 * (by 3D distance, excluding i, lower index first on ties) form the pairs; a
 * pair counts when (gt_i.z >= gt_j.z) equals (pred_i.z >= pred_j.z). Returns
 * the fraction of matching pairs. Throws DimensionMismatch and InvalidN
 * (n < 1 or n >= vertex count).
 */
double zn_accuracy(const Vertices& gt, const Vertices& pred, int n = 5);

/**
 * Least-squares similarity (or rigid, without `with_scale`) mapping src onto
 * dst, always a proper rotation. Throws DimensionMismatch and
 * DegenerateConfiguration when fewer than 3 points are given or either set is
 * collinear.
 */
SimilarityTransform rigid_align_keypoints(const Vertices& src, const Vertices& dst, bool with_scale = false);

/**
 * Mean distance from every GT vertex to its nearest predicted vertex, after
 * aligning pred onto the GT frame with rigid_align_keypoints(pred_keypoints,
 * gt_keypoints).
 */
double chamfer_one_sided(const Vertices& gt, const Vertices& pred, const Vertices& gt_keypoints,
                         const Vertices& pred_keypoints, bool with_scale = false);

/// Distance statistics, model units. rmse is the root mean square distance.
struct DistanceStats
{
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0; // population
    double rmse = 0.0;
    std::size_t count = 0;
};

DistanceStats distance_stats(std::vector<double> distances);

/**
 * Point-to-surface distance from every scan point to the predicted mesh,
 * after aligning the mesh onto the scan frame with
 * rigid_align_keypoints(mesh_keypoints, scan_keypoints). Throws NoFaces.
 */
DistanceStats scan_to_mesh(const Vertices& scan, const Mesh& mesh, const Vertices& scan_keypoints,
                           const Vertices& mesh_keypoints, bool with_scale = false);

/// One annotator's 2D landmarks for one image.
struct LabelSet
{
    std::string annotator_id;
    Points2D landmarks; // px
};

/// All label sets collected for one image.
struct LabeledImage
{
    std::string image_id;
    BBox bbox;
    std::vector<LabelSet> labels;
};

enum class PairDistance {
    /// Mean of per-landmark Euclidean distances.
    MeanPerLandmark,
    /// Euclidean norm of the concatenated coordinate difference.
    ConcatenatedNorm,
};

/// Normalized pairwise disagreement of one image's label sets.
double image_quality_score(const LabeledImage& image, PairDistance mode = PairDistance::MeanPerLandmark);

/**
 * Mean over images of image_quality_score(). Throws TooFewAnnotators when an
 * image has fewer than two label sets, DimensionMismatch when label sets of
 * one image differ in length, InvalidArgument when no images are given.
 */
double quality_score(const std::vector<LabeledImage>& images, PairDistance mode = PairDistance::MeanPerLandmark);

struct EulerMae
{
    double mae = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
    double yaw = 0.0;
};

/// Smallest absolute difference between two angles in degrees, in [0, 180].
double angle_difference_deg(double a, double b);

/// Per-angle mean absolute error, wraparound aware. Throws DimensionMismatch.
EulerMae euler_mae(const std::vector<EulerAngles>& preds, const std::vector<EulerAngles>& gts);

/// Rotation part of a model-view matrix with scale removed.
RotationMatrix model_view_rotation(const Eigen::Matrix4d& model_view);

struct BenchmarkSample
{
    std::string id;
    Annotation gt;
    /// Empty when the prediction could not be loaded.
    std::optional<Annotation> prediction;
    std::string failure;
};

struct SampleMetrics
{
    std::string id;
    bool failed = false;
    std::string failure;
    double nme = 0.0;
    std::optional<double> zn;
    double chamfer = 0.0;
    double pose_frob = 0.0;
    double pose_angle = 0.0; // degrees
    std::map<std::string, std::string> attributes;
};

struct MetricAggregate
{
    std::size_t count = 0;
    double nme = 0.0;
    std::optional<double> zn;
    std::size_t zn_count = 0;
    double chamfer = 0.0;
    double pose_frob = 0.0;
    double pose_angle = 0.0;
};

struct BenchmarkOptions
{
    int zn_n = 5;
    bool chamfer_with_scale = false;
    std::vector<std::string> subgroup_keys;
    /// 0 picks HEADFIT_THREADS from the environment, else the hardware count.
    int threads = 0;
};

struct MetricReport
{
    /// Length unit of chamfer values.
    std::string units = "model";
    int zn_n = 5;
    std::vector<SampleMetrics> samples; // sorted by id
    MetricAggregate overall;
    /// key -> value -> aggregate
    std::map<std::string, std::map<std::string, MetricAggregate>> subgroups;
    std::size_t failed_count = 0;
};

/// Mean of every metric over the non-failed samples.
MetricAggregate aggregate(const std::vector<const SampleMetrics*>& samples);

/// Metrics of one gt/prediction pair. Throws on invalid input.
SampleMetrics evaluate_sample(const HeadModel& model, const Annotation& gt, const Annotation& pred,
                              const BenchmarkOptions& options = {});

/**
 * Evaluates every sample and aggregates overall and per subgroup value.
 * Samples that fail to evaluate are reported as failed and excluded from the
 * aggregates. Throws InvalidArgument for an unknown subgroup key and
 * MissingAttribute when a sample lacks a requested attribute.
 */
MetricReport benchmark_report(const HeadModel& model, std::vector<BenchmarkSample> samples,
                              const BenchmarkOptions& options = {});

/// Thread count from HEADFIT_THREADS, else the hardware count (at least 1).
int default_thread_count();

} // namespace headfit
