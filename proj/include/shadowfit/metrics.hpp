#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/image.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace shadowfit {

// Intersection over union; two empty masks count as identical.
inline double iou(const ShadowMask& a, const ShadowMask& b) {
    require_same_shape(a.width, a.height, b.width, b.height, "iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Mask pixels with a 4-neighbor outside the mask (image borders count as outside).
inline std::vector<std::pair<int, int>> boundary_pixels(const ShadowMask& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            const bool edge = x == 0 || x == m.width - 1 || y == 0 || y == m.height - 1 ||
                              !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) ||
                              !m.at(x, y + 1);
            if (edge) out.emplace_back(x, y);
        }
    }
    return out;
}

namespace detail {

// Large finite stand-in for "no site"; true infinities would make the envelope
// intersection below evaluate inf - inf.
inline constexpr double kNoSite = 1e20;

// Felzenszwalb-Huttenlocher exact squared Euclidean distance transform, 1D pass.
inline void edt_pass(const double* f, double* d, int n, int stride, std::vector<int>& v,
                     std::vector<double>& z, std::vector<double>& scratch) {
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    scratch.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] = f[i * stride];
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[static_cast<std::size_t>(k)];
            s = ((scratch[static_cast<std::size_t>(q)] + static_cast<double>(q) * q) -
                 (scratch[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) /
                (2.0 * q - 2.0 * p);
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
        const int p = v[static_cast<std::size_t>(k)];
        const double dq = q - p;
        d[q * stride] = dq * dq + scratch[static_cast<std::size_t>(p)];
    }
}

}  // namespace detail

// Exact Euclidean distance (pixels) from every pixel to the nearest site pixel.
// Pixels are treated as lattice points; all distances are +inf when there are
// no sites.
inline Image<double> distance_transform(const ShadowMask& sites) {
    Image<double> d(sites.width, sites.height, detail::kNoSite);
    for (std::size_t i = 0; i < sites.size(); ++i)
        if (sites.data[i]) d.data[i] = 0.0;
    std::vector<int> v;
    std::vector<double> z, scratch;
    for (int x = 0; x < sites.width; ++x)
        detail::edt_pass(&d.data[static_cast<std::size_t>(x)], &d.data[static_cast<std::size_t>(x)],
                         sites.height, sites.width, v, z, scratch);
    for (int y = 0; y < sites.height; ++y)
        detail::edt_pass(&d.data[static_cast<std::size_t>(y) * sites.width],
                         &d.data[static_cast<std::size_t>(y) * sites.width], sites.width, 1, v, z,
                         scratch);
    for (double& val : d.data)
        val = val >= 0.5 * detail::kNoSite ? std::numeric_limits<double>::infinity()
                                           : std::sqrt(val);
    return d;
}

// Symmetric mean nearest-neighbor distance between boundary pixel sets,
// normalized by the image diagonal. One empty boundary against a non-empty one
// scores 1; two empty boundaries score 0.
inline double boundary_chamfer(const ShadowMask& a, const ShadowMask& b) {
    require_same_shape(a.width, a.height, b.width, b.height, "boundary_chamfer");
    const auto ba = boundary_pixels(a);
    const auto bb = boundary_pixels(b);
    if (ba.empty() && bb.empty()) return 0.0;
    if (ba.empty() || bb.empty()) return 1.0;
    ShadowMask sites_a(a.width, a.height), sites_b(b.width, b.height);
    for (const auto& [x, y] : ba) sites_a.at(x, y) = 1;
    for (const auto& [x, y] : bb) sites_b.at(x, y) = 1;
    const auto dist_to_a = distance_transform(sites_a);
    const auto dist_to_b = distance_transform(sites_b);
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const auto& [x, y] : ba) sum_ab += dist_to_b.at(x, y);
    for (const auto& [x, y] : bb) sum_ba += dist_to_a.at(x, y);
    const double mean = 0.5 * (sum_ab / static_cast<double>(ba.size()) +
                               sum_ba / static_cast<double>(bb.size()));
    const double diag = std::sqrt(static_cast<double>(a.width) * a.width +
                                  static_cast<double>(a.height) * a.height);
    return mean / diag;
}

inline constexpr double kTauSemanticDefault = 0.1;

// Mean absolute mask difference restricted to pixels whose saliency exceeds the
// threshold; 0 when no pixel qualifies.
inline double dino_semantic(const ShadowMask& m, const ShadowMask& target,
                            const SaliencyMap& saliency, double tau_semantic = kTauSemanticDefault) {
    require_same_shape(m.width, m.height, target.width, target.height, "dino_semantic");
    require_same_shape(m.width, m.height, saliency.width, saliency.height, "dino_semantic");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (saliency.data[i] > tau_semantic) {
            acc += std::abs(static_cast<double>(m.data[i]) - static_cast<double>(target.data[i]));
            ++count;
        }
    }
    if (count == 0) return 0.0;
    return acc / static_cast<double>(count);
}

}  // namespace shadowfit
