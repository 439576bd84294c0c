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

#include "headfit/types.hpp"

#include "Eigen/Core"

#include <cstddef>
#include <optional>
#include <vector>

namespace headfit {

struct Neighbor
{
    std::size_t index = 0;
    double squared_distance = 0.0;
};

/**
 * Exact nearest-neighbour queries over a fixed point set. Ties are broken
 * towards the lower point index, so results match a brute-force scan exactly.
 * Leaves are scanned with the SIMD distance kernels.
 */
class KdTree
{
public:
    explicit KdTree(const Vertices& points, std::size_t leaf_size = 16);

    std::size_t size() const { return order_.size(); }

    /// Requires a non-empty tree.
    Neighbor nearest(const Eigen::Vector3d& query) const;

    /// The k closest points ordered by (distance, index), skipping `exclude`.
    std::vector<Neighbor> k_nearest(const Eigen::Vector3d& query, std::size_t k,
                                    std::optional<std::size_t> exclude = std::nullopt) const;

private:
    struct Node
    {
        Eigen::Vector3d lo;
        Eigen::Vector3d hi;
        std::size_t begin = 0;
        std::size_t end = 0;
        int left = -1;
        int right = -1;
    };

    int build(std::size_t begin, std::size_t end, std::size_t leaf_size);

    std::vector<std::size_t> order_; // original index of each slot
    std::vector<double> xs_, ys_, zs_;
    std::vector<Node> nodes_;
};

struct ClosestPoint
{
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    double squared_distance = 0.0;
    std::size_t triangle = 0;
};

/// Closest point to p on the (closed) triangle abc, covering the interior,
/// edge and vertex regions.
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// Bounding-volume hierarchy over triangles for exact point-to-surface queries.
class TriangleBvh
{
public:
    /// Requires at least one face.
    TriangleBvh(const Vertices& vertices, const Faces& faces);

    ClosestPoint closest(const Eigen::Vector3d& query) const;

private:
    struct Node
    {
        Eigen::Vector3d lo;
        Eigen::Vector3d hi;
        std::size_t begin = 0;
        std::size_t end = 0;
        int left = -1;
        int right = -1;
    };

    int build(std::size_t begin, std::size_t end);
    void search(int node, const Eigen::Vector3d& q, ClosestPoint& best) const;

    Vertices vertices_;
    Faces faces_;
    std::vector<std::size_t> order_;
    std::vector<Eigen::Vector3d> centroids_;
    std::vector<Node> nodes_;
};

} // namespace headfit
