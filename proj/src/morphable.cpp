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
#include "headfit/morphable.hpp"

#include "headfit/error.hpp"
#include "headfit/rotations.hpp"
#include "headfit/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace headfit {

std::vector<int> HeadModel::subset(std::string_view name) const
{
    if (name == subset_names::full)
    {
        std::vector<int> all(static_cast<std::size_t>(vertex_count()));
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    const auto it = subsets.find(name);
    if (it == subsets.end())
        throw Error(ErrorCode::UnknownSubset, "no vertex subset named '" + std::string(name) + "'");
    return it->second;
}

bool HeadModel::has_subset(std::string_view name) const
{
    return name == subset_names::full || subsets.find(name) != subsets.end();
}

std::vector<std::string> check_invariants(const HeadModel& model)
{
    std::vector<std::string> out;
    const Eigen::Index k = model.template_vertices.rows();
    if (k == 0)
        out.emplace_back("template has no vertices");
    if (!model.template_vertices.allFinite())
        out.emplace_back("template has non-finite coordinates");
    if (model.shape_basis.rows() != 3 * k)
        out.emplace_back("shape basis row count is not 3K");
    if (model.expr_basis.rows() != 3 * k)
        out.emplace_back("expression basis row count is not 3K");
    if (!model.shape_basis.allFinite() || !model.expr_basis.allFinite())
        out.emplace_back("basis has non-finite entries");
    if (model.jaw_weights.size() != k)
        out.emplace_back("jaw weight count is not K");
    else if ((model.jaw_weights.array() < 0.0).any() || (model.jaw_weights.array() > 1.0).any())
        out.emplace_back("jaw weights outside [0, 1]");
    if (!model.jaw_joint.allFinite())
        out.emplace_back("jaw joint is not finite");
    for (const auto& [name, indices] : model.subsets)
    {
        for (int i : indices)
        {
            if (i < 0 || i >= k)
            {
                out.push_back("subset '" + name + "' has index " + std::to_string(i) + " outside [0, K)");
                break;
            }
        }
    }
    for (const auto& f : model.faces)
    {
        if (std::any_of(f.begin(), f.end(), [k](int i) { return i < 0 || i >= k; }))
        {
            out.emplace_back("face references a vertex outside [0, K)");
            break;
        }
    }
    if (k == kCanonicalVertexCount && model.subsets.count(std::string(subset_names::head)) &&
        model.subsets.at(std::string(subset_names::head)).size() != kCanonicalHeadCount)
        out.emplace_back("canonical model head subset does not have 3669 vertices");
    return out;
}

ShapeParams ShapeParams::zeros(const HeadModel& model)
{
    ShapeParams p;
    p.beta = Eigen::VectorXd::Zero(model.shape_count());
    p.psi = Eigen::VectorXd::Zero(model.expr_count());
    return p;
}

void check_dimensions(const HeadModel& model, const ShapeParams& params)
{
    if (params.beta.size() != model.shape_count() || params.psi.size() != model.expr_count())
        throw Error(ErrorCode::DimensionMismatch,
                    "parameters have " + std::to_string(params.beta.size()) + " shape / " +
                        std::to_string(params.psi.size()) + " expression coefficients, model has " +
                        std::to_string(model.shape_count()) + " / " + std::to_string(model.expr_count()));
}

Mesh decode(const HeadModel& model, const ShapeParams& params)
{
    check_dimensions(model, params);
    const auto& kernels = simd::active_kernels();
    const auto rows = static_cast<std::size_t>(model.template_vertices.size());

    Mesh mesh;
    mesh.vertices = model.template_vertices;
    double* out = mesh.vertices.data();
    kernels.accumulate_columns(out, model.shape_basis.data(), rows, params.beta.data(),
                               static_cast<std::size_t>(params.beta.size()));
    kernels.accumulate_columns(out, model.expr_basis.data(), rows, params.psi.data(),
                               static_cast<std::size_t>(params.psi.size()));

    if (!params.jaw.isZero(0.0))
    {
        for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i)
        {
            const double w = model.jaw_weights[i];
            if (w == 0.0)
                continue;
            const Eigen::Vector3d p = mesh.vertices.row(i).transpose() - model.jaw_joint;
            mesh.vertices.row(i) = (model.jaw_joint + rotation_vector_to_matrix(w * params.jaw) * p).transpose();
        }
    }
    mesh.faces = model.faces;
    return mesh;
}

Eigen::Vector3d decode_vertex(const HeadModel& model, const ShapeParams& params, int vertex,
                              Eigen::Ref<Eigen::Matrix<double, 3, Eigen::Dynamic>> jacobian)
{
    const int s = model.shape_count();
    const int e = model.expr_count();
    const auto shape_rows = model.shape_basis.middleRows(3 * vertex, 3);
    const auto expr_rows = model.expr_basis.middleRows(3 * vertex, 3);
    const Eigen::Vector3d v0 =
        model.template_vertices.row(vertex).transpose() + shape_rows * params.beta + expr_rows * params.psi;

    const double w = model.jaw_weights[vertex];
    if (w == 0.0)
    {
        jacobian.leftCols(s) = shape_rows;
        jacobian.middleCols(s, e) = expr_rows;
        jacobian.rightCols<3>().setZero();
        return v0;
    }
    const Eigen::Vector3d rotvec = w * params.jaw;
    const Eigen::Matrix3d r = rotation_vector_to_matrix(rotvec);
    const Eigen::Vector3d p = v0 - model.jaw_joint;
    jacobian.leftCols(s) = r * shape_rows;
    jacobian.middleCols(s, e) = r * expr_rows;
    jacobian.rightCols<3>() = w * rotation_vector_rotate_jacobian(rotvec, p);
    return model.jaw_joint + r * p;
}

Vertices subsample(const Vertices& vertices, std::span<const int> indices)
{
    Vertices out(static_cast<Eigen::Index>(indices.size()), 3);
    for (std::size_t k = 0; k < indices.size(); ++k)
    {
        const int i = indices[k];
        if (i < 0 || i >= vertices.rows())
            throw Error(ErrorCode::InvalidArgument, "vertex index " + std::to_string(i) + " out of range");
        out.row(static_cast<Eigen::Index>(k)) = vertices.row(i);
    }
    return out;
}

Vertices subsample(const HeadModel& model, const Mesh& mesh, std::string_view subset)
{
    const std::vector<int> indices = model.subset(subset);
    return subsample(mesh.vertices, indices);
}

namespace {

// Portable uniform draws: std::*_distribution output is implementation-defined,
// the raw mt19937_64 stream is not.
class Uniform
{
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}
    double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; } // [0, 1)
    double symmetric() { return 2.0 * next() - 1.0; }                           // [-1, 1)

private:
    std::mt19937_64 engine_;
};

double smoothstep(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

const Eigen::Vector3d kSemiAxes{0.75, 1.0, 0.85};

// Ellipsoid sampled on latitude rings (y up, front of the face along +z), with
// one vertex at each pole. Rings are stitched into triangles.
void build_template(int k, Vertices& verts, Faces& faces)
{
    const int interior = k - 2;
    const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(std::numbers::pi * k / 4.0))));
    std::vector<double> weight(static_cast<std::size_t>(rings));
    for (int j = 0; j < rings; ++j)
        weight[static_cast<std::size_t>(j)] = std::sin(std::numbers::pi * (j + 1) / (rings + 1));
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    std::vector<int> count(static_cast<std::size_t>(rings));
    for (int j = 0; j < rings; ++j)
        count[static_cast<std::size_t>(j)] =
            std::max(3, static_cast<int>(std::lround(weight[static_cast<std::size_t>(j)] * interior / total)));
    // Fix the total by nudging the widest rings (ties to the lower ring index).
    int sum = std::accumulate(count.begin(), count.end(), 0);
    while (sum != interior)
    {
        const int step = sum < interior ? 1 : -1;
        int best = -1;
        for (int j = 0; j < rings; ++j)
        {
            const int c = count[static_cast<std::size_t>(j)];
            if (step < 0 && c <= 3)
                continue;
            if (best < 0 || weight[static_cast<std::size_t>(j)] > weight[static_cast<std::size_t>(best)] ||
                (weight[static_cast<std::size_t>(j)] == weight[static_cast<std::size_t>(best)] &&
                 (step > 0 ? c < count[static_cast<std::size_t>(best)] : c > count[static_cast<std::size_t>(best)])))
                best = j;
        }
        count[static_cast<std::size_t>(best)] += step;
        sum += step;
    }

    verts.resize(k, 3);
    verts.row(0) << 0.0, kSemiAxes.y(), 0.0;
    std::vector<int> ring_start(static_cast<std::size_t>(rings));
    std::vector<double> ring_offset(static_cast<std::size_t>(rings));
    int next = 1;
    for (int j = 0; j < rings; ++j)
    {
        const double theta = std::numbers::pi * (j + 1) / (rings + 1);
        const int n = count[static_cast<std::size_t>(j)];
        ring_start[static_cast<std::size_t>(j)] = next;
        ring_offset[static_cast<std::size_t>(j)] = (j % 2) * 0.5;
        for (int i = 0; i < n; ++i)
        {
            const double phi = 2.0 * std::numbers::pi * (i + ring_offset[static_cast<std::size_t>(j)]) / n;
            verts.row(next++) << kSemiAxes.x() * std::sin(theta) * std::sin(phi), kSemiAxes.y() * std::cos(theta),
                kSemiAxes.z() * std::sin(theta) * std::cos(phi);
        }
    }
    verts.row(k - 1) << 0.0, -kSemiAxes.y(), 0.0;

    faces.clear();
    const auto ring_index = [&](int j, int i) {
        const int n = count[static_cast<std::size_t>(j)];
        return ring_start[static_cast<std::size_t>(j)] + (i % n);
    };
    for (int i = 0; i < count.front(); ++i)
        faces.push_back({0, ring_index(0, i + 1), ring_index(0, i)});
    for (int j = 0; j + 1 < rings; ++j)
    {
        const int na = count[static_cast<std::size_t>(j)];
        const int nb = count[static_cast<std::size_t>(j + 1)];
        const auto angle = [&](int ring, int i, int n) {
            return (i + ring_offset[static_cast<std::size_t>(ring)]) / n;
        };
        int ia = 0, ib = 0;
        while (ia < na || ib < nb)
        {
            const bool advance_a = ib == nb || (ia < na && angle(j, ia + 1, na) < angle(j + 1, ib + 1, nb));
            if (advance_a)
            {
                faces.push_back({ring_index(j, ia), ring_index(j + 1, ib), ring_index(j, ia + 1)});
                ++ia;
            }
            else
            {
                faces.push_back({ring_index(j, ia), ring_index(j + 1, ib), ring_index(j + 1, ib + 1)});
                ++ib;
            }
        }
    }
    const int last = rings - 1;
    for (int i = 0; i < count.back(); ++i)
        faces.push_back({k - 1, ring_index(last, i), ring_index(last, i + 1)});
}

// Smooth displacement fields: random vector combinations of quadratic and
// cubic monomials plus a few low-frequency sinusoids of the normalized
// position. Linear terms are left out so no column mimics a similarity.
Eigen::MatrixXd smooth_basis(const Vertices& normalized, int cols, Uniform& rng, double max_displacement,
                             const Eigen::VectorXd& mask)
{
    const Eigen::Index k = normalized.rows();
    Eigen::MatrixXd basis(3 * k, cols);
    constexpr int kMonomials = 16;
    constexpr int kWaves = 4;
    static const int kPowers[kMonomials][3] = {{2, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1},
                                               {3, 0, 0}, {0, 3, 0}, {0, 0, 3}, {2, 1, 0}, {2, 0, 1}, {1, 2, 0},
                                               {0, 2, 1}, {1, 0, 2}, {0, 1, 2}, {1, 1, 1}};
    for (int c = 0; c < cols; ++c)
    {
        Eigen::Matrix<double, 3, kMonomials> mono_coeff;
        for (int m = 0; m < kMonomials; ++m)
            mono_coeff.col(m) << rng.symmetric(), rng.symmetric(), rng.symmetric();
        Eigen::Matrix<double, 3, kWaves> wave_coeff, wave_freq;
        Eigen::Matrix<double, 1, kWaves> wave_phase;
        for (int w = 0; w < kWaves; ++w)
        {
            wave_coeff.col(w) << rng.symmetric(), rng.symmetric(), rng.symmetric();
            wave_freq.col(w) << 3.0 * rng.symmetric(), 3.0 * rng.symmetric(), 3.0 * rng.symmetric();
            wave_phase(w) = 2.0 * std::numbers::pi * rng.next();
        }
        double largest = 0.0;
        for (Eigen::Index i = 0; i < k; ++i)
        {
            const Eigen::Vector3d p = normalized.row(i).transpose();
            Eigen::Vector3d d = Eigen::Vector3d::Zero();
            for (int m = 0; m < kMonomials; ++m)
                d += mono_coeff.col(m) * (std::pow(p.x(), kPowers[m][0]) * std::pow(p.y(), kPowers[m][1]) *
                                          std::pow(p.z(), kPowers[m][2]));
            for (int w = 0; w < kWaves; ++w)
                d += wave_coeff.col(w) * std::sin(wave_freq.col(w).dot(p) + wave_phase(w));
            d *= mask[i];
            basis.block<3, 1>(3 * i, c) = d;
            largest = std::max(largest, d.norm());
        }
        if (largest > 0.0)
            basis.col(c) *= max_displacement / largest;
    }
    return basis;
}

std::vector<int> top_by_score(const std::vector<double>& score, std::size_t count)
{
    std::vector<int> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    order.resize(std::min(count, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

// Deterministic farthest-point sampling inside `pool`, starting at `seed_vertex`.
std::vector<int> farthest_points(const Vertices& verts, const std::vector<int>& pool, int seed_vertex,
                                 std::size_t count)
{
    count = std::min(count, pool.size());
    std::vector<int> picked;
    if (count == 0)
        return picked;
    std::vector<double> dist(pool.size(), INFINITY);
    int current = seed_vertex;
    if (std::find(pool.begin(), pool.end(), current) == pool.end())
        current = pool.front();
    while (picked.size() < count)
    {
        picked.push_back(current);
        int best = -1;
        double best_d = -1.0;
        for (std::size_t p = 0; p < pool.size(); ++p)
        {
            const double d = (verts.row(pool[p]) - verts.row(current)).squaredNorm();
            dist[p] = std::min(dist[p], d);
            if (dist[p] > best_d)
            {
                best_d = dist[p];
                best = pool[p];
            }
        }
        current = best;
    }
    return picked;
}

} // namespace

HeadModel synth_model(std::uint64_t seed, int vertex_count, int shape_count, int expr_count)
{
    if (vertex_count < 16 || shape_count < 1 || expr_count < 1)
        throw Error(ErrorCode::InvalidCounts, "synth_model needs K >= 16, S >= 1, E >= 1");

    HeadModel model;
    build_template(vertex_count, model.template_vertices, model.faces);
    const Eigen::Index k = vertex_count;

    Vertices normalized(k, 3);
    for (Eigen::Index i = 0; i < k; ++i)
        normalized.row(i) = model.template_vertices.row(i).cwiseQuotient(kSemiAxes.transpose());

    const double extent = 2.0 * kSemiAxes.maxCoeff();
    const double max_displacement = 0.05 * extent;
    Uniform shape_rng(seed * 2 + 1);
    Uniform expr_rng(seed * 2 + 2);
    model.shape_basis = smooth_basis(normalized, shape_count, shape_rng, max_displacement, Eigen::VectorXd::Ones(k));
    Eigen::VectorXd front(k);
    for (Eigen::Index i = 0; i < k; ++i)
        front[i] = 0.2 + 0.8 * smoothstep(0.5 * (normalized(i, 2) + 1.0));
    model.expr_basis = smooth_basis(normalized, expr_count, expr_rng, max_displacement, front);

    // Jaw: the lower third of the template (by height) ramps from weight 0 to 1.
    const double y_top = -kSemiAxes.y() / 3.0;
    const double y_full = -0.7 * kSemiAxes.y();
    model.jaw_joint = Eigen::Vector3d(0.0, -0.2 * kSemiAxes.y(), -0.3 * kSemiAxes.z());
    model.jaw_weights.resize(k);
    for (Eigen::Index i = 0; i < k; ++i)
        model.jaw_weights[i] = smoothstep((y_top - model.template_vertices(i, 1)) / (y_top - y_full));

    // Head: drop the back-lower region (the neck). Face: most frontal part of the head.
    const auto head_count = static_cast<std::size_t>(
        vertex_count == kCanonicalVertexCount
            ? kCanonicalHeadCount
            : std::lround(static_cast<double>(vertex_count) * kCanonicalHeadCount / kCanonicalVertexCount));
    std::vector<double> head_score(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i)
        head_score[static_cast<std::size_t>(i)] = normalized(i, 1) + 0.8 * normalized(i, 2);
    const std::vector<int> head = top_by_score(head_score, head_count);

    std::vector<double> face_score(static_cast<std::size_t>(k), -INFINITY);
    for (int i : head)
        face_score[static_cast<std::size_t>(i)] = normalized(i, 2) - 0.3 * std::abs(normalized(i, 1));
    const std::vector<int> face = top_by_score(face_score, head.size() / 2);

    // Seven keypoints: eye corners, nose tip, mouth corners.
    static const double kTargets[7][2] = {{-0.45, 0.25}, {-0.15, 0.25}, {0.15, 0.25}, {0.45, 0.25},
                                          {0.0, 0.0},    {-0.3, -0.45}, {0.3, -0.45}};
    std::vector<int> keypoints;
    std::set<int> used;
    for (const auto& t : kTargets)
    {
        const double zt = std::sqrt(std::max(0.0, 1.0 - t[0] * t[0] - t[1] * t[1]));
        const Eigen::RowVector3d target(t[0], t[1], zt);
        int best = -1;
        double best_d = INFINITY;
        for (Eigen::Index i = 0; i < k; ++i)
        {
            const double d = (normalized.row(i) - target).squaredNorm();
            if (d < best_d && !used.count(static_cast<int>(i)))
            {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        keypoints.push_back(best);
        used.insert(best);
    }

    model.subsets[std::string(subset_names::head)] = head;
    model.subsets[std::string(subset_names::face)] = face;
    model.subsets[std::string(subset_names::keypoint7)] = keypoints;
    const std::vector<int>& landmark_pool = face.size() >= 68 ? face : head.size() >= 68 ? head : model.subset("full");
    model.subsets[std::string(subset_names::landmark68)] =
        farthest_points(model.template_vertices, landmark_pool, keypoints[4], 68);
    const std::vector<int> all = model.subset(subset_names::full);
    const auto& pool191 = head.size() >= 191 ? head : all;
    const auto& pool445 = head.size() >= 445 ? head : all;
    model.subsets[std::string(subset_names::landmark191)] =
        farthest_points(model.template_vertices, pool191, keypoints[4], 191);
    model.subsets[std::string(subset_names::landmark445)] =
        farthest_points(model.template_vertices, pool445, keypoints[4], 445);
    model.synthetic_subsets = true;
    return model;
}

} // namespace headfit
