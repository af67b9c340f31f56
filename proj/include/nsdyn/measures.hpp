#ifndef NSDYN_MEASURES_HPP
#define NSDYN_MEASURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "ratmap.hpp"
#include "sphere.hpp"
#include "transport.hpp"

namespace nsdyn {

inline constexpr double min_atom_weight = 1e-15;
inline constexpr double weight_sum_tol = 1e-12;

namespace detail {

// Neumaier summation; plain summation of 1e5 equal weights drifts past 1e-12.
inline double compensated_sum(const std::vector<double>& v)
{
    double s = 0, c = 0;
    for (double x : v) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    return s + c;
}

} // namespace detail

/// Weighted atom list on the sphere; a probability measure.
class DiscreteMeasure {
public:
    DiscreteMeasure() : atoms_{SpherePoint()}, weights_{1.0} {}

    DiscreteMeasure(std::vector<SpherePoint> atoms, std::vector<double> weights)
        : atoms_(std::move(atoms)), weights_(std::move(weights))
    {
        require(!atoms_.empty(), "measure needs at least one atom");
        require(atoms_.size() == weights_.size(), "atom and weight counts differ");
        for (double w : weights_)
            require(std::isfinite(w) && w > min_atom_weight, "measure weights must exceed 1e-15");
        const double s = detail::compensated_sum(weights_);
        require(std::abs(s - 1.0) <= weight_sum_tol, "measure weights must sum to 1");
        uniform_ = std::all_of(weights_.begin(), weights_.end(), [&](double w) { return w == weights_.front(); });
    }

    static DiscreteMeasure dirac(const SpherePoint& x) { return DiscreteMeasure({x}, {1.0}); }

    static DiscreteMeasure uniform(std::vector<SpherePoint> atoms)
    {
        const double w = 1.0 / static_cast<double>(atoms.size());
        std::vector<double> weights(atoms.size(), w);
        return DiscreteMeasure(std::move(atoms), std::move(weights));
    }

    const std::vector<SpherePoint>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return atoms_.size(); }

    /// All weights bitwise equal.
    bool is_uniform() const { return uniform_; }

    /// Exact duplicates merged (first occurrence order kept).
    DiscreteMeasure merged() const
    {
        std::vector<SpherePoint> a;
        std::vector<double> w;
        std::map<std::array<double, 4>, std::size_t> slot;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const auto& x = atoms_[i];
            auto [it, fresh] = slot.try_emplace({x.a().real(), x.a().imag(), x.b().real(), x.b().imag()}, a.size());
            if (fresh) {
                a.push_back(x);
                w.push_back(weights_[i]);
            } else {
                w[it->second] += weights_[i];
            }
        }
        const double total = detail::compensated_sum(w);
        for (auto& v : w)
            v /= total;
        return DiscreteMeasure(std::move(a), std::move(w));
    }

    /// Image measure under f.
    DiscreteMeasure pushforward(const RationalMap& f) const
    {
        std::vector<SpherePoint> a;
        a.reserve(atoms_.size());
        for (const auto& x : atoms_)
            a.push_back(f(x));
        return DiscreteMeasure(std::move(a), weights_);
    }

private:
    std::vector<SpherePoint> atoms_;
    std::vector<double> weights_;
    bool uniform_ = true;
};

/// Convex combination sum c_i nu_i.
inline DiscreteMeasure mixture(const std::vector<DiscreteMeasure>& parts, const std::vector<double>& c)
{
    require(parts.size() == c.size() && !parts.empty(), "mixture sizes differ");
    std::vector<SpherePoint> a;
    std::vector<double> w;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (c[k] <= 0)
            continue;
        for (std::size_t i = 0; i < parts[k].size(); ++i) {
            a.push_back(parts[k].atoms()[i]);
            w.push_back(c[k] * parts[k].weights()[i]);
        }
    }
    return DiscreteMeasure(std::move(a), std::move(w));
}

/// Weighted list of measures; a probability measure on the space of measures.
class MetaMeasure {
public:
    MetaMeasure(std::vector<DiscreteMeasure> atoms, std::vector<double> weights)
        : atoms_(std::move(atoms)), weights_(std::move(weights))
    {
        require(!atoms_.empty(), "meta-measure needs at least one atom");
        require(atoms_.size() == weights_.size(), "atom and weight counts differ");
        for (double w : weights_)
            require(std::isfinite(w) && w > min_atom_weight, "meta-measure weights must exceed 1e-15");
        const double s = detail::compensated_sum(weights_);
        require(std::abs(s - 1.0) <= weight_sum_tol, "meta-measure weights must sum to 1");
    }

    static MetaMeasure dirac(DiscreteMeasure nu) { return MetaMeasure({std::move(nu)}, {1.0}); }

    static MetaMeasure uniform(std::vector<DiscreteMeasure> atoms)
    {
        const double w = 1.0 / static_cast<double>(atoms.size());
        std::vector<double> weights(atoms.size(), w);
        return MetaMeasure(std::move(atoms), std::move(weights));
    }

    const std::vector<DiscreteMeasure>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return atoms_.size(); }

private:
    std::vector<DiscreteMeasure> atoms_;
    std::vector<double> weights_;
};

namespace detail {

template <class A, class Dist>
double transport(const std::vector<A>& xs, const std::vector<double>& wx, bool ux, const std::vector<A>& ys,
                 const std::vector<double>& wy, bool uy, Dist&& dist)
{
    check_transport_size(xs.size(), ys.size());
    CostMatrix cost(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j)
            cost(i, j) = dist(i, j);
    if (xs.size() == 1) {
        double s = 0;
        for (std::size_t j = 0; j < ys.size(); ++j)
            s += wy[j] * cost(0, j);
        return s;
    }
    if (ys.size() == 1) {
        double s = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            s += wx[i] * cost(i, 0);
        return s;
    }
    if (ux && uy && xs.size() == ys.size())
        return assignment_cost(cost) / static_cast<double>(xs.size());
    return transportation_cost(cost, wx, wy);
}

} // namespace detail

/// Exact Wasserstein-1 distance with the chordal ground metric.
inline double wasserstein(const DiscreteMeasure& nu1, const DiscreteMeasure& nu2)
{
    if (nu1.is_uniform() && nu2.is_uniform() && nu1.size() == nu2.size() && nu1.size() > 1)
        return detail::transport(nu1.atoms(), nu1.weights(), true, nu2.atoms(), nu2.weights(), true,
                                 [&](std::size_t i, std::size_t j) {
                                     return chordal_distance(nu1.atoms()[i], nu2.atoms()[j]);
                                 });
    const DiscreteMeasure a = nu1.merged(), b = nu2.merged();
    return detail::transport(a.atoms(), a.weights(), false, b.atoms(), b.weights(), false,
                             [&](std::size_t i, std::size_t j) { return chordal_distance(a.atoms()[i], b.atoms()[j]); });
}

/// Matrix of pairwise ground distances W1(mu1.atoms[i], mu2.atoms[j]); rows computed by workers.
inline CostMatrix meta_ground_matrix(const MetaMeasure& mu1, const MetaMeasure& mu2, unsigned workers = 1)
{
    detail::check_transport_size(mu1.size(), mu2.size());
    CostMatrix g(mu1.size(), mu2.size());
    parallel_for(mu1.size() * mu2.size(), workers, [&](std::size_t k) {
        const std::size_t i = k / mu2.size(), j = k % mu2.size();
        g(i, j) = wasserstein(mu1.atoms()[i], mu2.atoms()[j]);
    });
    return g;
}

/// Wasserstein-1 distance on measures of measures; ground metric = `wasserstein`.
inline double meta_wasserstein(const MetaMeasure& mu1, const MetaMeasure& mu2, unsigned workers = 1)
{
    const CostMatrix g = meta_ground_matrix(mu1, mu2, workers);
    auto uni = [](const MetaMeasure& m) {
        return std::all_of(m.weights().begin(), m.weights().end(),
                           [&](double w) { return w == m.weights().front(); });
    };
    return detail::transport(mu1.atoms(), mu1.weights(), uni(mu1), mu2.atoms(), mu2.weights(), uni(mu2),
                             [&](std::size_t i, std::size_t j) { return g(i, j); });
}

enum class SamplerKind { spherical_area_uniform, unit_circle_uniform, custom_atom_list };

inline std::string to_string(SamplerKind k)
{
    switch (k) {
    case SamplerKind::spherical_area_uniform: return "spherical_area_uniform";
    case SamplerKind::unit_circle_uniform: return "unit_circle_uniform";
    case SamplerKind::custom_atom_list: return "custom_atom_list";
    }
    return "unknown";
}

inline SamplerKind sampler_kind_from_string(const std::string& s)
{
    if (s == "spherical_area_uniform" || s == "area")
        return SamplerKind::spherical_area_uniform;
    if (s == "unit_circle_uniform" || s == "circle")
        return SamplerKind::unit_circle_uniform;
    if (s == "custom_atom_list" || s == "custom")
        return SamplerKind::custom_atom_list;
    fail(ErrorCode::invalid_argument, "unknown sampler kind '" + s + "'");
}

/// Reference measure mu. Draw i depends only on (seed, i).
struct ReferenceSampler {
    SamplerKind kind = SamplerKind::spherical_area_uniform;
    std::uint64_t seed = 0;
    std::vector<SpherePoint> custom_atoms;
};

inline SpherePoint sample_one(const ReferenceSampler& s, std::uint64_t index)
{
    RandomStream rng(s.seed, index);
    switch (s.kind) {
    case SamplerKind::spherical_area_uniform: {
        // Archimedes: height uniform in [-1, 1], longitude uniform
        const double t = 2 * rng.uniform() - 1;
        const double phi = 2 * std::numbers::pi * rng.uniform();
        const double r = std::sqrt(std::max(0.0, 1 - t * t));
        return from_cartesian(r * std::cos(phi), r * std::sin(phi), t);
    }
    case SamplerKind::unit_circle_uniform:
        return SpherePoint::finite(std::polar(1.0, 2 * std::numbers::pi * rng.uniform()));
    case SamplerKind::custom_atom_list: {
        require(!s.custom_atoms.empty(), "custom sampler has no atoms");
        const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(s.custom_atoms.size()));
        return s.custom_atoms[std::min(k, s.custom_atoms.size() - 1)];
    }
    }
    return SpherePoint();
}

inline std::vector<SpherePoint> sample_reference(const ReferenceSampler& s, std::size_t count)
{
    require(count >= 1, "sample count must be >= 1");
    std::vector<SpherePoint> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(sample_one(s, i));
    return out;
}

struct CoarsenResult {
    DiscreteMeasure measure;
    double radius = 0;          ///< max distance from an atom to its representative
    double transport_bound = 0; ///< sum_i w_i d(x_i, rep(x_i)); an upper bound on W1(input, output)
};

namespace detail {

struct GridKey {
    std::int64_t x, y, z;
    bool operator==(const GridKey&) const = default;
};

struct GridHash {
    std::size_t operator()(const GridKey& k) const noexcept
    {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
        h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

/// Greedy eps-net over points of R^3 (chordal metric = Euclidean on the unit sphere).
/// Returns center indices and each point's nearest center.
inline std::vector<std::size_t> greedy_net(const std::vector<std::array<double, 3>>& pts, double eps,
                                           std::size_t limit, std::vector<std::size_t>* assignment)
{
    std::vector<std::size_t> centers;
    const double cell = std::max(eps, 1e-12);
    std::unordered_map<GridKey, std::vector<std::size_t>, GridHash> grid;
    auto key = [&](const std::array<double, 3>& p) {
        return GridKey{static_cast<std::int64_t>(std::floor(p[0] / cell)),
                       static_cast<std::int64_t>(std::floor(p[1] / cell)),
                       static_cast<std::int64_t>(std::floor(p[2] / cell))};
    };
    auto d2 = [&](std::size_t i, std::size_t j) {
        const double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1], dz = pts[i][2] - pts[j][2];
        return dx * dx + dy * dy + dz * dz;
    };
    auto nearest = [&](std::size_t i, double& best) {
        const GridKey k = key(pts[i]);
        std::size_t arg = SIZE_MAX;
        best = std::numeric_limits<double>::infinity();
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c) {
                    auto it = grid.find({k.x + a, k.y + b, k.z + c});
                    if (it == grid.end())
                        continue;
                    for (std::size_t j : it->second) {
                        const double d = d2(i, j);
                        if (d < best || (d == best && j < arg)) {
                            best = d;
                            arg = j;
                        }
                    }
                }
        return arg;
    };
    // membership test only: any center within eps, own cell first
    auto covered = [&](std::size_t i) {
        const GridKey k = key(pts[i]);
        auto own = grid.find(k);
        if (own != grid.end())
            for (std::size_t j : own->second)
                if (d2(i, j) <= eps * eps)
                    return true;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c) {
                    if (a == 0 && b == 0 && c == 0)
                        continue;
                    auto it = grid.find({k.x + a, k.y + b, k.z + c});
                    if (it == grid.end())
                        continue;
                    for (std::size_t j : it->second)
                        if (d2(i, j) <= eps * eps)
                            return true;
                }
        return false;
    };
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!covered(i)) {
            centers.push_back(i);
            grid[key(pts[i])].push_back(i);
            if (centers.size() > limit)
                return centers;
        }
    }
    if (assignment) {
        assignment->assign(pts.size(), 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best;
            (*assignment)[i] = nearest(i, best);
        }
    }
    return centers;
}

} // namespace detail

/// Greedy eps-net clustering down to at most `max_atoms` atoms. The net radius
/// is the smallest found by bisection; every atom moves to its nearest center.
inline CoarsenResult coarsen(const DiscreteMeasure& nu, std::size_t max_atoms)
{
    require(max_atoms >= 1, "max_atoms must be >= 1");
    if (nu.size() <= max_atoms)
        return {nu, 0.0, 0.0};
    std::vector<std::array<double, 3>> pts;
    pts.reserve(nu.size());
    for (const auto& a : nu.atoms())
        pts.push_back(to_cartesian(a));
    {
        std::vector<std::array<double, 3>> sorted(pts);
        std::sort(sorted.begin(), sorted.end());
        const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
        if (distinct <= max_atoms) {
            std::map<std::array<double, 3>, std::size_t> slot;
            std::vector<SpherePoint> atoms;
            std::vector<double> weights;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                auto [it, fresh] = slot.try_emplace(pts[i], atoms.size());
                if (fresh) {
                    atoms.push_back(nu.atoms()[i]);
                    weights.push_back(0.0);
                }
                weights[it->second] += nu.weights()[i];
            }
            double s = 0;
            for (double w : weights)
                s += w;
            for (auto& w : weights)
                w /= s;
            return {DiscreteMeasure(std::move(atoms), std::move(weights)), 0.0, 0.0};
        }
    }
    double lo = 0.0, hi = 2.0 + 1e-9;
    for (int it = 0; it < 60 && hi - lo > 1e-3 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (detail::greedy_net(pts, mid, max_atoms, nullptr).size() <= max_atoms)
                hi = mid;
            else
                lo = mid;
        }
    std::vector<std::size_t> assign;
    const auto centers = detail::greedy_net(pts, hi, max_atoms, &assign);
    std::unordered_map<std::size_t, std::size_t> slot;
    for (std::size_t k = 0; k < centers.size(); ++k)
        slot[centers[k]] = k;
    std::vector<SpherePoint> atoms;
    std::vector<double> weights(centers.size(), 0.0);
    for (std::size_t c : centers)
        atoms.push_back(nu.atoms()[c]);
    double radius = 0, bound = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t c = assign[i];
        weights[slot.at(c)] += nu.weights()[i];
        const double d = chordal_distance(nu.atoms()[i], nu.atoms()[c]);
        radius = std::max(radius, d);
        bound += nu.weights()[i] * d;
    }
    double s = 0;
    for (double w : weights)
        s += w;
    for (auto& w : weights)
        w /= s;
    return {DiscreteMeasure(std::move(atoms), std::move(weights)), radius, bound};
}

} // namespace nsdyn

#endif
