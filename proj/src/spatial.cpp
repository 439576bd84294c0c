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
#include "headfit/spatial.hpp"

#include "headfit/error.hpp"
#include "headfit/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace headfit {
namespace {

double box_squared_distance(const Eigen::Vector3d& q, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi)
{
    const Eigen::Vector3d d = (lo - q).cwiseMax(q - hi).cwiseMax(0.0);
    return d.squaredNorm();
}

bool closer(const Neighbor& a, const Neighbor& b)
{
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
}

} // namespace

KdTree::KdTree(const Vertices& points, std::size_t leaf_size)
{
    const auto n = static_cast<std::size_t>(points.rows());
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    xs_.resize(n);
    ys_.resize(n);
    zs_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        xs_[i] = points(static_cast<Eigen::Index>(i), 0);
        ys_[i] = points(static_cast<Eigen::Index>(i), 1);
        zs_[i] = points(static_cast<Eigen::Index>(i), 2);
    }
    if (n > 0)
        build(0, n, std::max<std::size_t>(leaf_size, 1));
}

int KdTree::build(std::size_t begin, std::size_t end, std::size_t leaf_size)
{
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = Eigen::Vector3d::Constant(INFINITY);
    node.hi = Eigen::Vector3d::Constant(-INFINITY);
    for (std::size_t i = begin; i < end; ++i)
    {
        const Eigen::Vector3d p(xs_[i], ys_[i], zs_[i]);
        node.lo = node.lo.cwiseMin(p);
        node.hi = node.hi.cwiseMax(p);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    const auto reorder = [&](std::vector<std::size_t> slots) {
        std::vector<double> x, y, z;
        std::vector<std::size_t> o;
        for (std::size_t s : slots)
        {
            x.push_back(xs_[s]);
            y.push_back(ys_[s]);
            z.push_back(zs_[s]);
            o.push_back(order_[s]);
        }
        std::copy(x.begin(), x.end(), xs_.begin() + static_cast<std::ptrdiff_t>(begin));
        std::copy(y.begin(), y.end(), ys_.begin() + static_cast<std::ptrdiff_t>(begin));
        std::copy(z.begin(), z.end(), zs_.begin() + static_cast<std::ptrdiff_t>(begin));
        std::copy(o.begin(), o.end(), order_.begin() + static_cast<std::ptrdiff_t>(begin));
    };

    std::vector<std::size_t> slots(end - begin);
    std::iota(slots.begin(), slots.end(), begin);
    if (end - begin <= leaf_size)
    {
        // Leaves hold points in original-index order so the kernel's
        // first-minimum rule is also the lowest-index rule.
        std::sort(slots.begin(), slots.end(), [&](std::size_t a, std::size_t b) { return order_[a] < order_[b]; });
        reorder(slots);
        return id;
    }

    Eigen::Index axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const std::vector<double>& coord = axis == 0 ? xs_ : axis == 1 ? ys_ : zs_;
    const std::size_t mid = (end - begin) / 2;
    std::nth_element(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(mid), slots.end(),
                     [&](std::size_t a, std::size_t b) {
                         return coord[a] < coord[b] || (coord[a] == coord[b] && order_[a] < order_[b]);
                     });
    reorder(slots);

    const int left = build(begin, begin + mid, leaf_size);
    const int right = build(begin + mid, end, leaf_size);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

Neighbor KdTree::nearest(const Eigen::Vector3d& q) const
{
    if (nodes_.empty())
        throw Error(ErrorCode::InvalidArgument, "nearest-neighbour query on an empty point set");
    const auto& kernels = simd::active_kernels();
    Neighbor best{0, INFINITY};
    std::vector<int> stack{0};
    while (!stack.empty())
    {
        const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (box_squared_distance(q, node.lo, node.hi) > best.squared_distance)
            continue;
        if (node.left < 0)
        {
            const simd::NearestHit hit = kernels.nearest(xs_.data() + node.begin, ys_.data() + node.begin,
                                                         zs_.data() + node.begin, node.end - node.begin, q.x(),
                                                         q.y(), q.z());
            const Neighbor candidate{order_[node.begin + hit.index], hit.squared_distance};
            if (closer(candidate, best))
                best = candidate;
            continue;
        }
        const Node& l = nodes_[static_cast<std::size_t>(node.left)];
        const Node& r = nodes_[static_cast<std::size_t>(node.right)];
        // Push the farther child first so the nearer one is searched first.
        if (box_squared_distance(q, l.lo, l.hi) <= box_squared_distance(q, r.lo, r.hi))
        {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
        else
        {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return best;
}

std::vector<Neighbor> KdTree::k_nearest(const Eigen::Vector3d& q, std::size_t k,
                                        std::optional<std::size_t> exclude) const
{
    std::vector<Neighbor> heap; // max-heap under `closer`
    if (k == 0 || nodes_.empty())
        return heap;
    const auto& kernels = simd::active_kernels();
    std::vector<double> dist;
    const auto worst = [&] { return heap.size() < k ? INFINITY : heap.front().squared_distance; };

    std::vector<int> stack{0};
    while (!stack.empty())
    {
        const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (box_squared_distance(q, node.lo, node.hi) > worst())
            continue;
        if (node.left < 0)
        {
            const std::size_t count = node.end - node.begin;
            dist.resize(count);
            kernels.squared_distances(xs_.data() + node.begin, ys_.data() + node.begin, zs_.data() + node.begin,
                                      count, q.x(), q.y(), q.z(), dist.data());
            for (std::size_t i = 0; i < count; ++i)
            {
                const Neighbor cand{order_[node.begin + i], dist[i]};
                if (exclude && cand.index == *exclude)
                    continue;
                if (heap.size() < k)
                {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end(), closer);
                }
                else if (closer(cand, heap.front()))
                {
                    std::pop_heap(heap.begin(), heap.end(), closer);
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end(), closer);
                }
            }
            continue;
        }
        const Node& l = nodes_[static_cast<std::size_t>(node.left)];
        const Node& r = nodes_[static_cast<std::size_t>(node.right)];
        if (box_squared_distance(q, l.lo, l.hi) <= box_squared_distance(q, r.lo, r.hi))
        {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
        else
        {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    std::sort_heap(heap.begin(), heap.end(), closer);
    return heap;
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c)
{
    // Voronoi-region walk (Ericson, Real-Time Collision Detection, 5.1.5).
    const Eigen::Vector3d ab = b - a;
    const Eigen::Vector3d ac = c - a;
    const Eigen::Vector3d ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0)
        return a;

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3)
        return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
        return a + (d1 / (d1 - d3)) * ab;

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6)
        return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
        return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

    const double denom = va + vb + vc;
    if (!(std::abs(denom) > 0.0))
    {
        // Zero-area triangle: nearest point on its three edges.
        const auto on_segment = [&](const Eigen::Vector3d& s, const Eigen::Vector3d& e) -> Eigen::Vector3d {
            const Eigen::Vector3d d = e - s;
            const double len2 = d.squaredNorm();
            const double t = len2 > 0.0 ? std::clamp((p - s).dot(d) / len2, 0.0, 1.0) : 0.0;
            return s + t * d;
        };
        Eigen::Vector3d best = on_segment(a, b);
        for (const Eigen::Vector3d& cand : {on_segment(b, c), on_segment(c, a)})
            if ((cand - p).squaredNorm() < (best - p).squaredNorm())
                best = cand;
        return best;
    }
    const double v = vb / denom;
    const double w = vc / denom;
    return a + ab * v + ac * w;
}

TriangleBvh::TriangleBvh(const Vertices& vertices, const Faces& faces) : vertices_(vertices), faces_(faces)
{
    if (faces_.empty())
        throw Error(ErrorCode::NoFaces, "mesh has no faces");
    for (const Triangle& f : faces_)
        for (int i : f)
            if (i < 0 || i >= vertices_.rows())
                throw Error(ErrorCode::InvalidArgument, "face references a missing vertex");
    order_.resize(faces_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (const Triangle& f : faces_)
        centroids_.push_back((vertices_.row(f[0]) + vertices_.row(f[1]) + vertices_.row(f[2])).transpose() / 3.0);
    build(0, faces_.size());
}

int TriangleBvh::build(std::size_t begin, std::size_t end)
{
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = Eigen::Vector3d::Constant(INFINITY);
    node.hi = Eigen::Vector3d::Constant(-INFINITY);
    for (std::size_t i = begin; i < end; ++i)
    {
        for (int v : faces_[order_[i]])
        {
            node.lo = node.lo.cwiseMin(vertices_.row(v).transpose());
            node.hi = node.hi.cwiseMax(vertices_.row(v).transpose());
        }
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 4)
        return id;

    Eigen::Index axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         return centroids_[a][axis] < centroids_[b][axis] ||
                                (centroids_[a][axis] == centroids_[b][axis] && a < b);
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

void TriangleBvh::search(int id, const Eigen::Vector3d& q, ClosestPoint& best) const
{
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (box_squared_distance(q, node.lo, node.hi) > best.squared_distance)
        return;
    if (node.left < 0)
    {
        for (std::size_t i = node.begin; i < node.end; ++i)
        {
            const Triangle& f = faces_[order_[i]];
            const Eigen::Vector3d p = closest_point_on_triangle(q, vertices_.row(f[0]).transpose(),
                                                                vertices_.row(f[1]).transpose(),
                                                                vertices_.row(f[2]).transpose());
            const double d = (p - q).squaredNorm();
            if (d < best.squared_distance || (d == best.squared_distance && order_[i] < best.triangle))
                best = {p, d, order_[i]};
        }
        return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    if (box_squared_distance(q, l.lo, l.hi) <= box_squared_distance(q, r.lo, r.hi))
    {
        search(node.left, q, best);
        search(node.right, q, best);
    }
    else
    {
        search(node.right, q, best);
        search(node.left, q, best);
    }
}

ClosestPoint TriangleBvh::closest(const Eigen::Vector3d& query) const
{
    ClosestPoint best;
    best.squared_distance = INFINITY;
    search(0, query, best);
    return best;
}

} // namespace headfit
