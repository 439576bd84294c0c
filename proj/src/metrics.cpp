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
#include "headfit/metrics.hpp"

#include "headfit/error.hpp"
#include "headfit/spatial.hpp"

#include "Eigen/Geometry"
#include "Eigen/SVD"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace headfit {

namespace {

Eigen::Matrix3Xd columns(const Vertices& v)
{
    return v.transpose();
}

bool is_collinear(const Vertices& points)
{
    const Eigen::RowVector3d mean = points.colwise().mean();
    const Eigen::MatrixXd centered = points.rowwise() - mean;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const auto& sv = svd.singularValues();
    return sv.size() < 2 || sv(0) <= 0.0 || sv(1) <= 1e-10 * sv(0);
}

Vertices apply_affine(const Vertices& v, const Eigen::Matrix4d& m)
{
    const Eigen::Matrix3d a = m.topLeftCorner<3, 3>();
    const Eigen::Vector3d t = m.topRightCorner<3, 1>();
    Vertices out(v.rows(), 3);
    for (Eigen::Index i = 0; i < v.rows(); ++i)
    {
        out.row(i) = (a * v.row(i).transpose() + t).transpose();
    }
    return out;
}

} // namespace

double bbox_size(const BBox& bbox)
{
    if (!(bbox.w > 0.0) || !(bbox.h > 0.0))
    {
        throw Error(ErrorCode::DegenerateInput, "bounding box must have positive width and height");
    }
    return std::sqrt(bbox.w * bbox.h);
}

double reprojection_nme(const Points2D& pred, const Points2D& gt, const BBox& bbox)
{
    if (pred.rows() != gt.rows() || gt.rows() == 0)
    {
        throw Error(ErrorCode::DimensionMismatch, "landmark arrays have " + std::to_string(pred.rows()) +
                                                      " and " + std::to_string(gt.rows()) + " rows");
    }
    const double d = bbox_size(bbox);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < gt.rows(); ++i)
    {
        sum += (pred.row(i) - gt.row(i)).norm();
    }
    return sum / static_cast<double>(gt.rows()) / d;
}

double zn_accuracy(const Vertices& gt, const Vertices& pred, int n)
{
    if (gt.rows() != pred.rows())
    {
        throw Error(ErrorCode::DimensionMismatch, "vertex arrays have " + std::to_string(gt.rows()) + " and " +
                                                      std::to_string(pred.rows()) + " rows");
    }
    if (n < 1 || n >= gt.rows())
    {
        throw Error(ErrorCode::InvalidN, "n = " + std::to_string(n) + " with " + std::to_string(gt.rows()) +
                                             " vertices");
    }
    const KdTree tree(gt);
    std::size_t agree = 0;
    for (Eigen::Index i = 0; i < gt.rows(); ++i)
    {
        const auto neighbors =
            tree.k_nearest(gt.row(i).transpose(), static_cast<std::size_t>(n), static_cast<std::size_t>(i));
        for (const auto& nb : neighbors)
        {
            const auto j = static_cast<Eigen::Index>(nb.index);
            const bool gt_order = gt(i, 2) >= gt(j, 2);
            const bool pred_order = pred(i, 2) >= pred(j, 2);
            agree += gt_order == pred_order ? 1 : 0;
        }
    }
    return static_cast<double>(agree) / (static_cast<double>(gt.rows()) * n);
}

SimilarityTransform rigid_align_keypoints(const Vertices& src, const Vertices& dst, bool with_scale)
{
    if (src.rows() != dst.rows())
    {
        throw Error(ErrorCode::DimensionMismatch, "keypoint sets have " + std::to_string(src.rows()) + " and " +
                                                      std::to_string(dst.rows()) + " rows");
    }
    if (src.rows() < 3 || is_collinear(src) || is_collinear(dst))
    {
        throw Error(ErrorCode::DegenerateConfiguration, "alignment needs at least 3 non-collinear keypoints");
    }
    if (src == dst)
    {
        return {};
    }
    const Eigen::Matrix4d m = Eigen::umeyama(columns(src), columns(dst), with_scale);
    SimilarityTransform t;
    const Eigen::Matrix3d sr = m.topLeftCorner<3, 3>();
    t.scale = with_scale ? std::cbrt(sr.determinant()) : 1.0;
    t.rotation = sr / t.scale;
    t.translation = m.topRightCorner<3, 1>();
    return t;
}

double chamfer_one_sided(const Vertices& gt, const Vertices& pred, const Vertices& gt_keypoints,
                         const Vertices& pred_keypoints, bool with_scale)
{
    if (gt.rows() == 0 || pred.rows() == 0)
    {
        throw Error(ErrorCode::DegenerateInput, "chamfer distance needs non-empty vertex sets");
    }
    const SimilarityTransform align = rigid_align_keypoints(pred_keypoints, gt_keypoints, with_scale);
    const KdTree tree(apply_similarity(pred, align));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < gt.rows(); ++i)
    {
        sum += std::sqrt(tree.nearest(gt.row(i).transpose()).squared_distance);
    }
    return sum / static_cast<double>(gt.rows());
}

DistanceStats distance_stats(std::vector<double> distances)
{
    DistanceStats s;
    s.count = distances.size();
    if (distances.empty())
    {
        return s;
    }
    const auto n = static_cast<double>(distances.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double d : distances)
    {
        sum += d;
        sum_sq += d * d;
    }
    s.mean = sum / n;
    s.rmse = std::sqrt(sum_sq / n);
    double var = 0.0;
    for (double d : distances)
    {
        var += (d - s.mean) * (d - s.mean);
    }
    s.std = std::sqrt(var / n);

    std::sort(distances.begin(), distances.end());
    const std::size_t mid = distances.size() / 2;
    s.median = distances.size() % 2 == 1 ? distances[mid] : 0.5 * (distances[mid - 1] + distances[mid]);
    return s;
}

DistanceStats scan_to_mesh(const Vertices& scan, const Mesh& mesh, const Vertices& scan_keypoints,
                           const Vertices& mesh_keypoints, bool with_scale)
{
    if (mesh.faces.empty())
    {
        throw Error(ErrorCode::NoFaces, "scan-to-mesh distance needs a mesh with faces");
    }
    const SimilarityTransform align = rigid_align_keypoints(mesh_keypoints, scan_keypoints, with_scale);
    const TriangleBvh bvh(apply_similarity(mesh.vertices, align), mesh.faces);
    std::vector<double> distances(static_cast<std::size_t>(scan.rows()));
    for (Eigen::Index i = 0; i < scan.rows(); ++i)
    {
        distances[static_cast<std::size_t>(i)] = std::sqrt(bvh.closest(scan.row(i).transpose()).squared_distance);
    }
    return distance_stats(std::move(distances));
}

double image_quality_score(const LabeledImage& image, PairDistance mode)
{
    const std::size_t m = image.labels.size();
    if (m < 2)
    {
        throw Error(ErrorCode::TooFewAnnotators,
                    "image '" + image.image_id + "' has " + std::to_string(m) + " label set(s), need at least 2");
    }
    const Eigen::Index rows = image.labels.front().landmarks.rows();
    for (const auto& l : image.labels)
    {
        if (l.landmarks.rows() != rows || rows == 0)
        {
            throw Error(ErrorCode::DimensionMismatch, "label sets of image '" + image.image_id +
                                                          "' differ in length or are empty");
        }
    }
    const double d = bbox_size(image.bbox);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i)
    {
        for (std::size_t j = i + 1; j < m; ++j)
        {
            const Points2D diff = image.labels[i].landmarks - image.labels[j].landmarks;
            if (mode == PairDistance::ConcatenatedNorm)
            {
                sum += diff.norm();
            }
            else
            {
                sum += diff.rowwise().norm().mean();
            }
        }
    }
    const double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
    return sum / pairs / d;
}

double quality_score(const std::vector<LabeledImage>& images, PairDistance mode)
{
    if (images.empty())
    {
        throw Error(ErrorCode::InvalidArgument, "quality score needs at least one image");
    }
    double sum = 0.0;
    for (const auto& image : images)
    {
        sum += image_quality_score(image, mode);
    }
    return sum / static_cast<double>(images.size());
}

double angle_difference_deg(double a, double b)
{
    const double d = std::fmod(std::abs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

EulerMae euler_mae(const std::vector<EulerAngles>& preds, const std::vector<EulerAngles>& gts)
{
    if (preds.size() != gts.size() || preds.empty())
    {
        throw Error(ErrorCode::DimensionMismatch, "angle lists have " + std::to_string(preds.size()) + " and " +
                                                      std::to_string(gts.size()) + " entries");
    }
    EulerMae r;
    for (std::size_t i = 0; i < preds.size(); ++i)
    {
        r.pitch += angle_difference_deg(preds[i].pitch, gts[i].pitch);
        r.roll += angle_difference_deg(preds[i].roll, gts[i].roll);
        r.yaw += angle_difference_deg(preds[i].yaw, gts[i].yaw);
    }
    const auto n = static_cast<double>(preds.size());
    r.pitch /= n;
    r.roll /= n;
    r.yaw /= n;
    r.mae = (r.pitch + r.roll + r.yaw) / 3.0;
    return r;
}

RotationMatrix model_view_rotation(const Eigen::Matrix4d& model_view)
{
    return nearest_rotation(model_view.topLeftCorner<3, 3>());
}

MetricAggregate aggregate(const std::vector<const SampleMetrics*>& samples)
{
    MetricAggregate a;
    double zn_sum = 0.0;
    for (const SampleMetrics* s : samples)
    {
        if (s->failed)
        {
            continue;
        }
        ++a.count;
        a.nme += s->nme;
        a.chamfer += s->chamfer;
        a.pose_frob += s->pose_frob;
        a.pose_angle += s->pose_angle;
        if (s->zn)
        {
            ++a.zn_count;
            zn_sum += *s->zn;
        }
    }
    if (a.count > 0)
    {
        const auto n = static_cast<double>(a.count);
        a.nme /= n;
        a.chamfer /= n;
        a.pose_frob /= n;
        a.pose_angle /= n;
    }
    if (a.zn_count > 0)
    {
        a.zn = zn_sum / static_cast<double>(a.zn_count);
    }
    return a;
}

SampleMetrics evaluate_sample(const HeadModel& model, const Annotation& gt, const Annotation& pred,
                              const BenchmarkOptions& options)
{
    const Eigen::Index k = model.vertex_count();
    if (gt.vertices.rows() != k)
    {
        throw Error(ErrorCode::DimensionMismatch, "ground truth has " + std::to_string(gt.vertices.rows()) +
                                                      " vertices, model has " + std::to_string(k));
    }
    const bool same_topology = pred.vertices.rows() == k;

    SampleMetrics m;
    const std::vector<int> lmk = model.subset(subset_names::landmark68);
    const Points2D gt68 = project_frustum(subsample(gt.vertices, lmk), gt.matrices, gt.image_size);
    Points2D pred68;
    if (pred.landmarks2d)
    {
        pred68 = *pred.landmarks2d;
    }
    else if (same_topology)
    {
        const ImageSize viewport = pred.image_size.width > 0 ? pred.image_size : gt.image_size;
        pred68 = project_frustum(subsample(pred.vertices, lmk), pred.matrices, viewport);
    }
    else
    {
        throw Error(ErrorCode::SchemaMismatch, "prediction has neither the model topology nor landmarks2d");
    }
    m.nme = reprojection_nme(pred68, gt68, gt.bbox);

    if (same_topology)
    {
        const std::vector<int> head = model.subset(subset_names::head);
        m.zn = zn_accuracy(apply_affine(subsample(gt.vertices, head), gt.matrices.model_view),
                           apply_affine(subsample(pred.vertices, head), pred.matrices.model_view), options.zn_n);
    }

    const std::vector<int> kp = model.subset(subset_names::keypoint7);
    Vertices pred_kp;
    if (pred.keypoints)
    {
        pred_kp = *pred.keypoints;
    }
    else if (same_topology)
    {
        pred_kp = subsample(pred.vertices, kp);
    }
    else
    {
        throw Error(ErrorCode::SchemaMismatch, "prediction has neither the model topology nor keypoints");
    }
    m.chamfer = chamfer_one_sided(subsample(gt.vertices, model.subset(subset_names::face)), pred.vertices,
                                  subsample(gt.vertices, kp), pred_kp, options.chamfer_with_scale);

    const RotationMatrix r_gt = model_view_rotation(gt.matrices.model_view);
    const RotationMatrix r_pred = model_view_rotation(pred.matrices.model_view);
    m.pose_frob = pose_error_frobenius(r_pred, r_gt);
    m.pose_angle = pose_error_angle(r_pred, r_gt);
    return m;
}

int default_thread_count()
{
    if (const char* env = std::getenv("HEADFIT_THREADS"))
    {
        const int n = std::atoi(env);
        if (n > 0)
        {
            return n;
        }
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

MetricReport benchmark_report(const HeadModel& model, std::vector<BenchmarkSample> samples,
                              const BenchmarkOptions& options)
{
    std::vector<std::string> keys;
    for (const auto& key : options.subgroup_keys)
    {
        keys.push_back(canonical_attribute_key(key));
    }
    if (options.zn_n < 1)
    {
        throw Error(ErrorCode::InvalidN, "n = " + std::to_string(options.zn_n));
    }
    std::sort(samples.begin(), samples.end(),
              [](const BenchmarkSample& a, const BenchmarkSample& b) { return a.id < b.id; });
    for (const auto& s : samples)
    {
        for (const auto& key : keys)
        {
            if (!attribute_value(s.gt.attributes, key))
            {
                throw Error(ErrorCode::MissingAttribute, "sample '" + s.id + "' has no '" + key + "' attribute");
            }
        }
    }

    MetricReport report;
    report.zn_n = options.zn_n;
    report.samples.resize(samples.size());

    auto evaluate = [&](std::size_t i) {
        const BenchmarkSample& s = samples[i];
        SampleMetrics m;
        if (!s.prediction)
        {
            m.failed = true;
            m.failure = s.failure.empty() ? "missing prediction" : s.failure;
        }
        else
        {
            try
            {
                m = evaluate_sample(model, s.gt, *s.prediction, options);
            }
            catch (const std::exception& e)
            {
                m = SampleMetrics{};
                m.failed = true;
                m.failure = e.what();
            }
        }
        m.id = s.id;
        for (const auto& key : attribute_keys())
        {
            if (auto v = attribute_value(s.gt.attributes, key))
            {
                m.attributes[key] = *v;
            }
        }
        report.samples[i] = std::move(m);
    };

    const int threads =
        std::min<int>(options.threads > 0 ? options.threads : default_thread_count(),
                      static_cast<int>(std::max<std::size_t>(1, samples.size())));
    if (threads <= 1)
    {
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
            evaluate(i);
        }
    }
    else
    {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
        {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < samples.size(); i = next++)
                {
                    evaluate(i);
                }
            });
        }
        for (auto& th : pool)
        {
            th.join();
        }
    }

    std::vector<const SampleMetrics*> all;
    for (const auto& m : report.samples)
    {
        all.push_back(&m);
        report.failed_count += m.failed ? 1 : 0;
    }
    report.overall = aggregate(all);
    for (const auto& key : keys)
    {
        std::map<std::string, std::vector<const SampleMetrics*>> groups;
        for (const auto& m : report.samples)
        {
            groups[m.attributes.at(key)].push_back(&m);
        }
        auto& out = report.subgroups[key];
        for (const auto& [value, members] : groups)
        {
            out[value] = aggregate(members);
        }
    }
    return report;
}

} // namespace headfit
