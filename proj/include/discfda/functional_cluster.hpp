/**
 * @file functional_cluster.hpp
 * @brief Functional k-means (global and class-conditioned), elbow scans,
 *        silhouettes and modified-band-depth outlier screening
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "functional_stats.hpp"

namespace discfda {

enum class Metric { L2, Deriv1, Deriv2 };
enum class SilhouetteMode { Standard, Literal };

constexpr int metric_channel(Metric m) { return m == Metric::L2 ? 0 : (m == Metric::Deriv1 ? 1 : 2); }

constexpr std::string_view metric_name(Metric m) {
    switch (m) {
    case Metric::L2: return "l2";
    case Metric::Deriv1: return "d1";
    case Metric::Deriv2: return "d2";
    }
    return "?";
}

inline std::optional<Metric> parse_metric(std::string_view s) {
    if (s == "l2") return Metric::L2;
    if (s == "d1" || s == "deriv1") return Metric::Deriv1;
    if (s == "d2" || s == "deriv2") return Metric::Deriv2;
    return std::nullopt;
}

constexpr std::string_view silhouette_mode_name(SilhouetteMode m) { return m == SilhouetteMode::Standard ? "standard" : "literal"; }

inline std::optional<SilhouetteMode> parse_silhouette_mode(std::string_view s) {
    if (s == "standard") return SilhouetteMode::Standard;
    if (s == "literal") return SilhouetteMode::Literal;
    return std::nullopt;
}

struct ClusteringConfig {
    int G = 2;
    Metric metric = Metric::L2;
    int max_iters = 100;
    int restarts = 20;
    std::uint64_t seed = 0;
    SilhouetteMode silhouette_mode = SilhouetteMode::Standard;
};

struct ClusteringResult {
    std::vector<GridCurve> centroids;
    std::vector<int> assignments;  // per input curve, cluster id in [0, G)
    double wcss = 0.0;
    std::vector<double> wcss_trace;
    int iterations = 0;
    std::uint64_t seed_used = 0;
    int restart_used = 0;

    bool operator==(const ClusteringResult& o) const {
        auto same_curve = [](const GridCurve& a, const GridCurve& b) {
            return a.grid == b.grid && a.values == b.values && a.deriv1 == b.deriv1 && a.deriv2 == b.deriv2;
        };
        if (centroids.size() != o.centroids.size()) return false;
        for (std::size_t g = 0; g < centroids.size(); ++g)
            if (!same_curve(centroids[g], o.centroids[g])) return false;
        return assignments == o.assignments && wcss == o.wcss && wcss_trace == o.wcss_trace && iterations == o.iterations &&
               seed_used == o.seed_used && restart_used == o.restart_used;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t content_hash(const GridCurve& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
        for (double x : v) {
            auto bits = std::bit_cast<std::uint64_t>(x);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xFF;
                h *= 0x100000001b3ULL;
            }
        }
        h ^= 0xFF;
        h *= 0x100000001b3ULL;
    };
    mix(c.values);
    if (c.deriv1) mix(*c.deriv1);
    if (c.deriv2) mix(*c.deriv2);
    return h;
}

/// Curves on the active channel, scaled by sqrt(w/T) so that the squared
/// functional distance is a plain squared Euclidean norm.
class FeatureMatrix {
public:
    FeatureMatrix(std::span<const GridCurve> curves, std::span<const std::size_t> order, int channel) {
        n_ = order.size();
        dim_ = curves.empty() ? 0 : curves.front().values.size();
        data_.resize(n_ * dim_);
        if (n_ == 0) return;
        const auto& grid = curves.front().grid;
        std::vector<double> scale(dim_);
        for (std::size_t i = 0; i < dim_; ++i) scale[i] = std::sqrt(grid.weights()[i] / grid.t_max());
        for (std::size_t r = 0; r < n_; ++r) {
            const auto& v = curves[order[r]].channel(channel);
            for (std::size_t i = 0; i < dim_; ++i) data_[r * dim_ + i] = v[i] * scale[i];
        }
    }

    std::size_t rows() const { return n_; }
    std::size_t dim() const { return dim_; }
    const double* row(std::size_t r) const { return data_.data() + r * dim_; }

    static double sq_dist(const double* a, const double* b, std::size_t dim) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            double d = a[i] - b[i];
            s += d * d;
        }
        return s;
    }

private:
    std::size_t n_ = 0, dim_ = 0;
    std::vector<double> data_;
};

struct LloydRun {
    std::vector<int> assign;  // canonical order
    std::vector<double> centroids;
    double wcss = 0.0;
    std::vector<double> trace;
    int iterations = 0;
};

inline void update_centroids(const FeatureMatrix& X, const std::vector<int>& assign, int G, std::vector<double>& centroids) {
    const std::size_t dim = X.dim();
    centroids.assign(static_cast<std::size_t>(G) * dim, 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(G), 0);
    // running mean: exact when all members coincide
    for (std::size_t r = 0; r < X.rows(); ++r) {
        auto g = static_cast<std::size_t>(assign[r]);
        const double inv = 1.0 / static_cast<double>(++counts[g]);
        const double* x = X.row(r);
        double* c = centroids.data() + g * dim;
        for (std::size_t i = 0; i < dim; ++i) c[i] += (x[i] - c[i]) * inv;
    }
}

inline double total_wcss(const FeatureMatrix& X, const std::vector<int>& assign, const std::vector<double>& centroids) {
    double s = 0.0;
    for (std::size_t r = 0; r < X.rows(); ++r)
        s += FeatureMatrix::sq_dist(X.row(r), centroids.data() + static_cast<std::size_t>(assign[r]) * X.dim(), X.dim());
    return s;
}

/// Lloyd iterations from the given initial centroids.
inline LloydRun lloyd(const FeatureMatrix& X, int G, std::vector<double> centroids, int max_iters) {
    const std::size_t n = X.rows(), dim = X.dim();
    LloydRun run;
    run.assign.assign(n, -1);
    std::vector<double> best_d(n, std::numeric_limits<double>::infinity());
    for (int m = 0; m < max_iters; ++m) {
        bool changed = false;
        for (std::size_t r = 0; r < n; ++r) {
            int cur = run.assign[r];
            double cur_d = cur >= 0 ? FeatureMatrix::sq_dist(X.row(r), centroids.data() + static_cast<std::size_t>(cur) * dim, dim)
                                    : std::numeric_limits<double>::infinity();
            int best = cur;
            for (int g = 0; g < G; ++g) {
                if (g == cur) continue;
                double d = FeatureMatrix::sq_dist(X.row(r), centroids.data() + static_cast<std::size_t>(g) * dim, dim);
                // strict improvement only; ties keep the current (or lowest) cluster
                if (d < cur_d || (best < 0 && d == cur_d)) {
                    cur_d = d;
                    best = g;
                }
            }
            if (best != run.assign[r]) {
                run.assign[r] = best;
                changed = true;
            }
            best_d[r] = cur_d;
        }
        if (!changed && m > 0) break;

        // empty clusters take the curve farthest from its centroid
        for (int attempt = 0;; ++attempt) {
            std::vector<std::size_t> counts(static_cast<std::size_t>(G), 0);
            for (int a : run.assign) ++counts[static_cast<std::size_t>(a)];
            auto empty = std::find(counts.begin(), counts.end(), 0u);
            if (empty == counts.end()) break;
            if (attempt == 3) throw Error(ErrorCode::EmptyClusterUnrecoverable, "cluster stayed empty after 3 reseeds");
            for (std::size_t g = 0; g < counts.size(); ++g) {
                if (counts[g] != 0) continue;
                std::size_t far = n;
                double far_d = -1.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (counts[static_cast<std::size_t>(run.assign[r])] < 2) continue;
                    if (best_d[r] > far_d) {
                        far_d = best_d[r];
                        far = r;
                    }
                }
                if (far == n) continue;
                --counts[static_cast<std::size_t>(run.assign[far])];
                run.assign[far] = static_cast<int>(g);
                ++counts[g];
                best_d[far] = 0.0;
                std::copy(X.row(far), X.row(far) + dim, centroids.begin() + static_cast<std::ptrdiff_t>(g * dim));
            }
        }

        update_centroids(X, run.assign, G, centroids);
        run.trace.push_back(total_wcss(X, run.assign, centroids));
        run.iterations = m + 1;
    }
    run.centroids = std::move(centroids);
    run.wcss = run.trace.empty() ? total_wcss(X, run.assign, run.centroids) : run.trace.back();
    return run;
}

inline std::vector<double> kmeanspp_init(const FeatureMatrix& X, int G, std::mt19937_64& rng) {
    const std::size_t n = X.rows(), dim = X.dim();
    std::vector<double> centroids;
    centroids.reserve(static_cast<std::size_t>(G) * dim);
    std::vector<bool> chosen(n, false);
    auto pick = [&](std::size_t r) {
        chosen[r] = true;
        centroids.insert(centroids.end(), X.row(r), X.row(r) + dim);
    };
    pick(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))));
    std::vector<double> d2(n);
    for (std::size_t r = 0; r < n; ++r) d2[r] = FeatureMatrix::sq_dist(X.row(r), centroids.data(), dim);
    for (int g = 1; g < G; ++g) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) total += d2[r];
        std::size_t next = n;
        if (total > 0.0) {
            double target = uniform01(rng) * total, acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                if (d2[r] <= 0.0) continue;
                acc += d2[r];
                next = r;
                if (acc > target) break;
            }
        } else {
            for (std::size_t r = 0; r < n && next == n; ++r)
                if (!chosen[r]) next = r;
        }
        pick(next);
        const double* c = centroids.data() + static_cast<std::size_t>(g) * dim;
        for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], FeatureMatrix::sq_dist(X.row(r), c, dim));
    }
    return centroids;
}

/// Input indices sorted by curve content so that results do not depend on
/// input order.
inline std::vector<std::size_t> canonical_order(std::span<const GridCurve> curves) {
    std::vector<std::uint64_t> hashes(curves.size());
    for (std::size_t i = 0; i < curves.size(); ++i) hashes[i] = content_hash(curves[i]);
    std::vector<std::size_t> order(curves.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
        return curves[a].values < curves[b].values;
    });
    return order;
}

inline void check_curves(std::span<const GridCurve> curves, int channel) {
    for (const auto& c : curves) {
        require_same_grid(curves.front(), c);
        if (!c.has_channel(channel)) throw Error(ErrorCode::MissingDerivatives, "clustering metric needs derivative channel " + std::to_string(channel));
    }
}

inline GridCurve mean_of(std::span<const GridCurve> curves, const std::vector<std::size_t>& members) {
    CurveGroup group{"", {}};
    group.curves.reserve(members.size());
    for (auto i : members) group.curves.push_back(curves[i]);
    return functional_mean(group);
}

/// Converts the best canonical-order run into a result over the input order.
/// Clusters are numbered by their lowest member input index.
inline ClusteringResult finish(std::span<const GridCurve> curves, const std::vector<std::size_t>& order, const LloydRun& run, int G,
                               std::uint64_t seed, int restart) {
    const std::size_t n = curves.size();
    std::vector<int> raw(n);
    for (std::size_t r = 0; r < n; ++r) raw[order[r]] = run.assign[r];
    std::vector<int> relabel(static_cast<std::size_t>(G), -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (relabel[static_cast<std::size_t>(raw[i])] < 0) relabel[static_cast<std::size_t>(raw[i])] = next++;
    ClusteringResult res;
    res.assignments.resize(n);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(G));
    for (std::size_t i = 0; i < n; ++i) {
        res.assignments[i] = relabel[static_cast<std::size_t>(raw[i])];
        members[static_cast<std::size_t>(res.assignments[i])].push_back(i);
    }
    for (auto& m : members) res.centroids.push_back(mean_of(curves, m));
    res.wcss = run.wcss;
    res.wcss_trace = run.trace;
    res.iterations = run.iterations;
    res.seed_used = seed;
    res.restart_used = restart;
    return res;
}

inline std::vector<double> flatten_centroids(const FeatureMatrix& X, const std::vector<int>& assign, int G) {
    std::vector<double> c;
    update_centroids(X, assign, G, c);
    return c;
}

/// Best-of-restarts k-means in canonical order; optional extra warm start.
inline ClusteringResult kmeans_impl(std::span<const GridCurve> curves, const ClusteringConfig& cfg, const std::vector<double>* warm_start,
                                    LloydRun* best_out = nullptr) {
    const int channel = metric_channel(cfg.metric);
    auto order = canonical_order(curves);
    FeatureMatrix X(curves, order, channel);
    std::optional<LloydRun> best;
    int best_restart = 0;
    for (int r = 0; r < cfg.restarts; ++r) {
        std::mt19937_64 rng(splitmix64(cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r)));
        auto run = lloyd(X, cfg.G, kmeanspp_init(X, cfg.G, rng), cfg.max_iters);
        if (!best || run.wcss < best->wcss) {
            best = std::move(run);
            best_restart = r;
        }
    }
    if (warm_start) {
        auto run = lloyd(X, cfg.G, *warm_start, cfg.max_iters);
        if (run.wcss < best->wcss) {
            best = std::move(run);
            best_restart = cfg.restarts;
        }
    }
    if (best_out) *best_out = *best;
    return finish(curves, order, *best, cfg.G, cfg.seed, best_restart);
}

inline void check_config(const ClusteringConfig& cfg, std::size_t n) {
    if (cfg.G < 1) throw Error(ErrorCode::InvalidArgument, "G must be >= 1");
    if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    if (cfg.restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 1");
    if (static_cast<std::size_t>(cfg.G) > n)
        throw Error(ErrorCode::TooFewCurves, std::to_string(n) + " curves for G=" + std::to_string(cfg.G));
}

}  // namespace detail

/// Functional k-means: k-means++ seeding, Lloyd iterations under the
/// configured distance, best final WCSS over the restarts.
inline ClusteringResult kmeans(std::span<const GridCurve> curves, const ClusteringConfig& cfg) {
    detail::check_config(cfg, curves.size());
    detail::check_curves(curves, metric_channel(cfg.metric));
    return detail::kmeans_impl(curves, cfg, nullptr);
}

struct ConditionedCluster {
    std::vector<std::size_t> members;  // input indices of this class
    ClusteringResult result;           // assignments indexed like `members`
};

/// Seed used for the class at position `class_index` in sorted label order.
inline std::uint64_t class_seed(std::uint64_t seed, std::size_t class_index) { return seed ^ static_cast<std::uint64_t>(class_index); }

/// k-means run independently inside every labelled class. Classes without an
/// entry in per_class_G use cfg.G.
inline std::map<std::string, ConditionedCluster> conditioned_kmeans(std::span<const GridCurve> curves, std::span<const std::string> labels,
                                                                    const std::map<std::string, int>& per_class_G,
                                                                    const ClusteringConfig& cfg) {
    if (labels.size() != curves.size()) throw Error(ErrorCode::LengthMismatch, "one label per curve is required");
    std::map<std::string, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
    std::map<std::string, ConditionedCluster> out;
    std::size_t j = 0;
    for (const auto& [label, members] : classes) {
        ClusteringConfig c = cfg;
        if (auto it = per_class_G.find(label); it != per_class_G.end()) c.G = it->second;
        c.seed = class_seed(cfg.seed, j++);
        if (static_cast<std::size_t>(c.G) > members.size())
            throw Error(ErrorCode::ClassTooSmall,
                        "class '" + label + "' has " + std::to_string(members.size()) + " curves, G=" + std::to_string(c.G) + " requested");
        std::vector<GridCurve> subset;
        subset.reserve(members.size());
        for (auto i : members) subset.push_back(curves[i]);
        out.emplace(label, ConditionedCluster{members, kmeans(subset, c)});
    }
    return out;
}

struct ElbowResult {
    std::vector<double> wcss;  // wcss[G-1]
    int suggested_g = 1;
    std::vector<ClusteringResult> results;
};

/// Suggested G: the interior G with the largest relative second difference
/// (W(G-1) - 2W(G) + W(G+1)) / W(G). Zero everywhere, or no interior G, gives 1.
inline int suggest_elbow(std::span<const double> wcss) {
    if (wcss.size() < 3 || wcss.front() <= 0.0) return 1;
    int best = 1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 1; g + 1 < wcss.size(); ++g) {
        double num = wcss[g - 1] - 2.0 * wcss[g] + wcss[g + 1];
        double score = wcss[g] > 0.0 ? num / wcss[g] : (wcss[g - 1] > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity());
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(g) + 1;
        }
    }
    return best;
}

/// WCSS for G = 1..g_max. Each G also tries a warm start from the G-1
/// solution plus the worst-fitted curve, so the scan is non-increasing.
inline ElbowResult elbow_scan(std::span<const GridCurve> curves, int g_max, const ClusteringConfig& cfg) {
    if (g_max < 1) throw Error(ErrorCode::InvalidArgument, "g_max must be >= 1");
    if (static_cast<std::size_t>(g_max) > curves.size())
        throw Error(ErrorCode::TooFewCurves, std::to_string(curves.size()) + " curves for g_max=" + std::to_string(g_max));
    const int channel = metric_channel(cfg.metric);
    detail::check_curves(curves, channel);
    ElbowResult out;
    auto order = detail::canonical_order(curves);
    detail::FeatureMatrix X(curves, order, channel);
    detail::LloydRun prev;
    for (int G = 1; G <= g_max; ++G) {
        ClusteringConfig c = cfg;
        c.G = G;
        detail::check_config(c, curves.size());
        std::vector<double> warm;
        const std::vector<double>* warm_ptr = nullptr;
        if (G > 1) {
            warm = prev.centroids;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t r = 0; r < X.rows(); ++r) {
                double d = detail::FeatureMatrix::sq_dist(X.row(r), prev.centroids.data() + static_cast<std::size_t>(prev.assign[r]) * X.dim(), X.dim());
                if (d > far_d) {
                    far_d = d;
                    far = r;
                }
            }
            warm.insert(warm.end(), X.row(far), X.row(far) + X.dim());
            warm_ptr = &warm;
        }
        auto res = detail::kmeans_impl(curves, c, warm_ptr, &prev);
        out.wcss.push_back(res.wcss);
        out.results.push_back(std::move(res));
    }
    out.suggested_g = suggest_elbow(out.wcss);
    return out;
}

struct SilhouetteReport {
    std::vector<double> s;
    std::vector<double> a;
    std::vector<double> b;
    double average = 0.0;
    SilhouetteMode mode = SilhouetteMode::Standard;
};

/// Functional silhouette. Standard mode takes b(i) as the smallest mean
/// distance to another cluster; literal mode takes the smallest distance to
/// any single profile outside the cluster. Singletons and a = b = 0 give 0.
inline SilhouetteReport silhouette(std::span<const GridCurve> curves, const ClusteringResult& result, Metric metric, SilhouetteMode mode) {
    const std::size_t n = curves.size();
    if (result.assignments.size() != n) throw Error(ErrorCode::LengthMismatch, "assignments do not match curves");
    int G = 0;
    for (int a : result.assignments) G = std::max(G, a + 1);
    if (G < 2) throw Error(ErrorCode::SingleCluster, "silhouette needs at least 2 clusters");
    const int channel = metric_channel(metric);
    detail::check_curves(curves, channel);
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), 0);
    detail::FeatureMatrix X(curves, identity, channel);
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i * n + j] = dist[j * n + i] = std::sqrt(detail::FeatureMatrix::sq_dist(X.row(i), X.row(j), X.dim()));

    std::vector<std::size_t> sizes(static_cast<std::size_t>(G), 0);
    for (int a : result.assignments) ++sizes[static_cast<std::size_t>(a)];

    SilhouetteReport rep;
    rep.mode = mode;
    rep.s.resize(n);
    rep.a.resize(n);
    rep.b.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto own = static_cast<std::size_t>(result.assignments[i]);
        std::vector<double> sum(static_cast<std::size_t>(G), 0.0);
        double nearest_other = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            auto cj = static_cast<std::size_t>(result.assignments[j]);
            sum[cj] += dist[i * n + j];
            if (cj != own) nearest_other = std::min(nearest_other, dist[i * n + j]);
        }
        double a = sizes[own] > 1 ? sum[own] / static_cast<double>(sizes[own] - 1) : 0.0;
        double b = std::numeric_limits<double>::infinity();
        if (mode == SilhouetteMode::Standard) {
            for (std::size_t g = 0; g < sizes.size(); ++g)
                if (g != own && sizes[g] > 0) b = std::min(b, sum[g] / static_cast<double>(sizes[g]));
        } else {
            b = nearest_other;
        }
        double s = 0.0;
        double denom = std::max(a, b);
        if (sizes[own] > 1 && denom > 0.0) s = (b - a) / denom;
        rep.a[i] = a;
        rep.b[i] = b;
        rep.s[i] = s;
        total += s;
    }
    rep.average = total / static_cast<double>(n);
    return rep;
}

/// Modified band depth with J = 2: for each node, the share of curve pairs
/// whose closed band contains the curve, averaged over nodes. Pairs that
/// include the curve itself count.
inline std::vector<double> mbd(std::span<const GridCurve> curves) {
    const std::size_t n = curves.size();
    if (n < 3) throw Error(ErrorCode::TooFewCurves, "band depth needs at least 3 curves");
    for (const auto& c : curves) detail::require_same_grid(curves.front(), c);
    const std::size_t nodes = curves.front().values.size();
    auto choose2 = [](std::uint64_t m) { return m * (m - (m > 0 ? 1 : 0)) / 2; };
    const std::uint64_t pairs = choose2(n);
    std::vector<std::uint64_t> counts(n, 0);
    std::vector<double> col(n), sorted(n);
    for (std::size_t t = 0; t < nodes; ++t) {
        for (std::size_t i = 0; i < n; ++i) col[i] = curves[i].values[t];
        sorted = col;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < n; ++k) {
            auto below = static_cast<std::uint64_t>(std::lower_bound(sorted.begin(), sorted.end(), col[k]) - sorted.begin());
            auto above = static_cast<std::uint64_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), col[k]));
            counts[k] += pairs - choose2(below) - choose2(above);
        }
    }
    std::vector<double> depth(n);
    const double denom = static_cast<double>(pairs) * static_cast<double>(nodes);
    for (std::size_t k = 0; k < n; ++k) depth[k] = static_cast<double>(counts[k]) / denom;
    return depth;
}

struct DepthReport {
    std::vector<double> depths;
    std::vector<std::size_t> central_set;
    std::vector<double> envelope_min;
    std::vector<double> envelope_max;
    std::vector<double> fence_min;
    std::vector<double> fence_max;
    std::vector<std::size_t> outliers;
    double central_fraction = 0.30;
    double fence_factor = 3.0;
};

/// Depth-based outlier screening. The central set is the ceil(fraction n)
/// deepest curves (ties by index); its pointwise envelope is widened by
/// fence_factor times its range, and any curve leaving that fence at some node
/// is an outlier. fence_factor = 0 uses the bare envelope. A 1e-12 relative
/// slack absorbs rounding where the envelope has zero width.
inline DepthReport mbd_outliers(std::span<const GridCurve> curves, double central_fraction = 0.30, double fence_factor = 3.0) {
    const std::size_t n = curves.size();
    if (n < 4) throw Error(ErrorCode::TooFewCurves, "outlier screening needs at least 4 curves");
    if (!(central_fraction > 0.0 && central_fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "central fraction must be in (0, 1]");
    if (!(fence_factor >= 0.0)) throw Error(ErrorCode::InvalidArgument, "fence factor must be >= 0");
    DepthReport rep;
    rep.central_fraction = central_fraction;
    rep.fence_factor = fence_factor;
    rep.depths = mbd(curves);
    // guard against 0.3 * 10 = 3.0000000000000004
    auto m = static_cast<std::size_t>(std::ceil(central_fraction * static_cast<double>(n) - 1e-9));
    m = std::clamp<std::size_t>(m, 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rep.depths[a] > rep.depths[b]; });
    rep.central_set.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(rep.central_set.begin(), rep.central_set.end());

    const std::size_t nodes = curves.front().values.size();
    rep.envelope_min.assign(nodes, std::numeric_limits<double>::infinity());
    rep.envelope_max.assign(nodes, -std::numeric_limits<double>::infinity());
    for (auto k : rep.central_set) {
        for (std::size_t t = 0; t < nodes; ++t) {
            rep.envelope_min[t] = std::min(rep.envelope_min[t], curves[k].values[t]);
            rep.envelope_max[t] = std::max(rep.envelope_max[t], curves[k].values[t]);
        }
    }
    rep.fence_min.resize(nodes);
    rep.fence_max.resize(nodes);
    for (std::size_t t = 0; t < nodes; ++t) {
        double range = rep.envelope_max[t] - rep.envelope_min[t];
        // rounding slack, so nodes where every curve coincides flag nothing
        double slack = 1e-12 * std::max({1.0, std::abs(rep.envelope_min[t]), std::abs(rep.envelope_max[t])});
        rep.fence_min[t] = rep.envelope_min[t] - fence_factor * range - slack;
        rep.fence_max[t] = rep.envelope_max[t] + fence_factor * range + slack;
    }
    std::vector<bool> central(n, false);
    for (auto k : rep.central_set) central[k] = true;
    for (std::size_t k = 0; k < n; ++k) {
        if (central[k]) continue;
        for (std::size_t t = 0; t < nodes; ++t) {
            double v = curves[k].values[t];
            if (v < rep.fence_min[t] || v > rep.fence_max[t]) {
                rep.outliers.push_back(k);
                break;
            }
        }
    }
    return rep;
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "labelings differ in length");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ca[a[i]] += 1;
        cb[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double sum_joint = 0, sum_a = 0, sum_b = 0;
    for (auto& [k, v] : joint) sum_joint += c2(v);
    for (auto& [k, v] : ca) sum_a += c2(v);
    for (auto& [k, v] : cb) sum_b += c2(v);
    double total = c2(static_cast<double>(a.size()));
    double expected = sum_a * sum_b / total;
    double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

}  // namespace discfda
