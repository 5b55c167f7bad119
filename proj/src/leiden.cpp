#include "hgdomain/clustering.hpp"
#include "hgdomain/knn.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hgdomain {

SnnGraph build_snn_graph(const Eigen::MatrixXd& X, int k_snn) {
    const auto n = static_cast<int>(X.rows());
    if (k_snn < 1 || k_snn >= n) {
        throw std::invalid_argument("build_snn_graph: k_snn=" + std::to_string(k_snn) + " must lie in [1, " + std::to_string(n) + ")");
    }
    auto knn = exact_knn(X, k_snn);

    // Closed neighborhoods and their inverse lists.
    std::vector<std::vector<int>> members_of(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        members_of[static_cast<std::size_t>(i)].push_back(i);
        for (int j : knn[static_cast<std::size_t>(i)]) {
            members_of[static_cast<std::size_t>(j)].push_back(i);
        }
    }

    SnnGraph g;
    g.n_vertices = n;
    std::vector<int> shared(static_cast<std::size_t>(n), 0);
    std::vector<int> touched;
    for (int i = 0; i < n; ++i) {
        touched.clear();
        auto visit = [&](int m) {
            for (int j : members_of[static_cast<std::size_t>(m)]) {
                if (j > i) {
                    if (shared[static_cast<std::size_t>(j)]++ == 0) {
                        touched.push_back(j);
                    }
                }
            }
        };
        visit(i);
        for (int m : knn[static_cast<std::size_t>(i)]) {
            visit(m);
        }
        std::sort(touched.begin(), touched.end());
        for (int j : touched) {
            g.edges.push_back({i, j, shared[static_cast<std::size_t>(j)] / static_cast<double>(k_snn + 1)});
            shared[static_cast<std::size_t>(j)] = 0;
        }
    }
    return g;
}

double modularity(const SnnGraph& g, const std::vector<int>& labels, double resolution) {
    if (static_cast<int>(labels.size()) != g.n_vertices) {
        throw std::invalid_argument("modularity: label count does not match the vertex count");
    }
    std::vector<double> strength(static_cast<std::size_t>(g.n_vertices), 0.0);
    std::map<int, double> internal;
    std::map<int, double> total;
    double two_m = 0;
    for (const auto& e : g.edges) {
        strength[static_cast<std::size_t>(e.a)] += e.weight;
        strength[static_cast<std::size_t>(e.b)] += e.weight;
        two_m += 2 * e.weight;
        if (labels[static_cast<std::size_t>(e.a)] == labels[static_cast<std::size_t>(e.b)]) {
            internal[labels[static_cast<std::size_t>(e.a)]] += 2 * e.weight;
        }
    }
    if (two_m == 0) {
        return 0;
    }
    for (int v = 0; v < g.n_vertices; ++v) {
        total[labels[static_cast<std::size_t>(v)]] += strength[static_cast<std::size_t>(v)];
    }
    double q = 0;
    for (const auto& [c, k] : total) {
        auto it = internal.find(c);
        double in = it == internal.end() ? 0.0 : it->second;
        q += in - resolution * k * k / two_m;
    }
    return q / two_m;
}

namespace {

// Weighted graph with self-loops. `self_loop[v]` holds A_vv, `strength[v] = sum_j A_vj` including A_vv.
struct Graph {
    int n = 0;
    std::vector<std::vector<std::pair<int, double>>> adj;
    std::vector<double> self_loop;
    std::vector<double> strength;
    double two_m = 0;
};

Graph from_snn(const SnnGraph& g) {
    Graph out;
    out.n = g.n_vertices;
    out.adj.resize(static_cast<std::size_t>(out.n));
    out.self_loop.assign(static_cast<std::size_t>(out.n), 0.0);
    out.strength.assign(static_cast<std::size_t>(out.n), 0.0);
    for (const auto& e : g.edges) {
        if (e.a == e.b) {
            throw std::invalid_argument("leiden_communities: graph contains a self-loop");
        }
        out.adj[static_cast<std::size_t>(e.a)].emplace_back(e.b, e.weight);
        out.adj[static_cast<std::size_t>(e.b)].emplace_back(e.a, e.weight);
        out.strength[static_cast<std::size_t>(e.a)] += e.weight;
        out.strength[static_cast<std::size_t>(e.b)] += e.weight;
    }
    out.two_m = std::accumulate(out.strength.begin(), out.strength.end(), 0.0);
    return out;
}

Graph aggregate(const Graph& g, const std::vector<int>& membership, int n_groups) {
    Graph out;
    out.n = n_groups;
    out.adj.resize(static_cast<std::size_t>(n_groups));
    out.self_loop.assign(static_cast<std::size_t>(n_groups), 0.0);
    out.strength.assign(static_cast<std::size_t>(n_groups), 0.0);
    std::vector<std::map<int, double>> acc(static_cast<std::size_t>(n_groups));
    for (int v = 0; v < g.n; ++v) {
        int cv = membership[static_cast<std::size_t>(v)];
        out.strength[static_cast<std::size_t>(cv)] += g.strength[static_cast<std::size_t>(v)];
        out.self_loop[static_cast<std::size_t>(cv)] += g.self_loop[static_cast<std::size_t>(v)];
        for (auto [u, w] : g.adj[static_cast<std::size_t>(v)]) {
            int cu = membership[static_cast<std::size_t>(u)];
            if (cu == cv) {
                out.self_loop[static_cast<std::size_t>(cv)] += w;
            } else {
                acc[static_cast<std::size_t>(cv)][cu] += w;
            }
        }
    }
    for (int c = 0; c < n_groups; ++c) {
        for (auto [d, w] : acc[static_cast<std::size_t>(c)]) {
            out.adj[static_cast<std::size_t>(c)].emplace_back(d, w);
        }
    }
    out.two_m = g.two_m;
    return out;
}

// Renumbers community ids to 0..k-1 by first appearance and returns k.
int renumber(std::vector<int>& community) {
    std::vector<int> map(community.size(), -1);
    int next = 0;
    for (auto& c : community) {
        auto& m = map[static_cast<std::size_t>(c)];
        if (m < 0) {
            m = next++;
        }
        c = m;
    }
    return next;
}

class Optimizer {
public:
    Optimizer(const Graph& g, double resolution) : g_(g), resolution_(resolution) {}

    // Fast local moving. Returns whether any node changed community.
    bool move_nodes(std::vector<int>& community, const std::vector<int>& order) {
        const auto n = static_cast<std::size_t>(g_.n);
        std::vector<double> total(n, 0.0);
        std::vector<int> size(n, 0);
        for (std::size_t v = 0; v < n; ++v) {
            total[static_cast<std::size_t>(community[v])] += g_.strength[v];
            ++size[static_cast<std::size_t>(community[v])];
        }
        std::vector<int> empty;
        for (std::size_t c = n; c-- > 0;) {
            if (size[c] == 0) {
                empty.push_back(static_cast<int>(c));
            }
        }

        std::deque<int> queue(order.begin(), order.end());
        std::vector<char> queued(n, 1);
        std::vector<double> link(n, 0.0);
        std::vector<int> seen;
        bool changed = false;

        while (!queue.empty()) {
            int v = queue.front();
            queue.pop_front();
            queued[static_cast<std::size_t>(v)] = 0;

            const int current = community[static_cast<std::size_t>(v)];
            const double kv = g_.strength[static_cast<std::size_t>(v)];

            seen.clear();
            for (auto [u, w] : g_.adj[static_cast<std::size_t>(v)]) {
                int cu = community[static_cast<std::size_t>(u)];
                if (link[static_cast<std::size_t>(cu)] == 0) {
                    seen.push_back(cu);
                }
                link[static_cast<std::size_t>(cu)] += w;
            }

            total[static_cast<std::size_t>(current)] -= kv;
            --size[static_cast<std::size_t>(current)];

            auto gain = [&](int c) {
                return link[static_cast<std::size_t>(c)] - resolution_ * kv * total[static_cast<std::size_t>(c)] / g_.two_m;
            };

            int best = current;
            double best_gain = gain(current);
            for (int c : seen) {
                double gc = gain(c);
                if (gc > best_gain) {
                    best_gain = gc;
                    best = c;
                }
            }
            if (best_gain < 0) {
                // A singleton scores zero.
                if (size[static_cast<std::size_t>(current)] == 0) {
                    best = current;
                } else {
                    best = empty.back();
                }
            }

            if (best != current && size[static_cast<std::size_t>(current)] == 0) {
                empty.push_back(current);
            }
            if (best != current && !empty.empty() && empty.back() == best) {
                empty.pop_back();
            }
            total[static_cast<std::size_t>(best)] += kv;
            ++size[static_cast<std::size_t>(best)];

            if (best != current) {
                community[static_cast<std::size_t>(v)] = best;
                changed = true;
                for (auto [u, w] : g_.adj[static_cast<std::size_t>(v)]) {
                    if (!queued[static_cast<std::size_t>(u)] && community[static_cast<std::size_t>(u)] != best) {
                        queued[static_cast<std::size_t>(u)] = 1;
                        queue.push_back(u);
                    }
                }
            }

            for (int c : seen) {
                link[static_cast<std::size_t>(c)] = 0;
            }
        }
        return changed;
    }

    // Splits every community into well-connected sub-communities. Returns refined ids, renumbered.
    std::vector<int> refine(const std::vector<int>& community, const std::vector<int>& order) {
        const auto n = static_cast<std::size_t>(g_.n);
        std::vector<int> refined(n);
        std::iota(refined.begin(), refined.end(), 0);

        std::vector<double> community_total(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            community_total[static_cast<std::size_t>(community[v])] += g_.strength[v];
        }

        // Refined-community strength and weight to the rest of the parent community.
        std::vector<double> total(g_.strength);
        std::vector<double> external(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            for (auto [u, w] : g_.adj[v]) {
                if (community[static_cast<std::size_t>(u)] == community[v]) {
                    external[v] += w;
                }
            }
        }
        std::vector<char> singleton(n, 1);
        std::vector<double> link(n, 0.0);
        std::vector<int> seen;

        for (int v : order) {
            const auto vi = static_cast<std::size_t>(v);
            if (!singleton[vi]) {
                continue;
            }
            const double kv = g_.strength[vi];
            const double ks = community_total[static_cast<std::size_t>(community[vi])];
            if (external[static_cast<std::size_t>(refined[vi])] < resolution_ * kv * (ks - kv) / g_.two_m) {
                continue;
            }

            seen.clear();
            for (auto [u, w] : g_.adj[vi]) {
                if (community[static_cast<std::size_t>(u)] != community[vi]) {
                    continue;
                }
                int cu = refined[static_cast<std::size_t>(u)];
                if (cu == refined[vi]) {
                    continue;
                }
                if (link[static_cast<std::size_t>(cu)] == 0) {
                    seen.push_back(cu);
                }
                link[static_cast<std::size_t>(cu)] += w;
            }

            int best = -1;
            double best_gain = 0;
            for (int c : seen) {
                const double kc = total[static_cast<std::size_t>(c)];
                bool well_connected = external[static_cast<std::size_t>(c)] >= resolution_ * kc * (ks - kc) / g_.two_m;
                if (!well_connected) {
                    continue;
                }
                double gc = link[static_cast<std::size_t>(c)] - resolution_ * kv * kc / g_.two_m;
                if (gc > best_gain) {
                    best_gain = gc;
                    best = c;
                }
            }

            if (best >= 0) {
                const int own = refined[vi];
                external[static_cast<std::size_t>(best)] += external[static_cast<std::size_t>(own)] - 2 * link[static_cast<std::size_t>(best)];
                total[static_cast<std::size_t>(best)] += kv;
                total[static_cast<std::size_t>(own)] = 0;
                external[static_cast<std::size_t>(own)] = 0;
                refined[vi] = best;
                singleton[static_cast<std::size_t>(best)] = 0;
                singleton[vi] = 0;
            }
            for (int c : seen) {
                link[static_cast<std::size_t>(c)] = 0;
            }
        }
        renumber(refined);
        return refined;
    }

private:
    const Graph& g_;
    double resolution_;
};

}

ClusterAssignment leiden_communities(const SnnGraph& snn, double resolution, std::uint64_t seed) {
    if (!(resolution > 0)) {
        throw std::invalid_argument("leiden_communities: resolution must be positive");
    }

    ClusterAssignment out;
    out.method = ClusterMethod::leiden;
    out.parameter = resolution;
    out.seed = seed;

    Graph graph = from_snn(snn);
    const auto n = static_cast<std::size_t>(graph.n);
    std::vector<int> membership(n);
    std::iota(membership.begin(), membership.end(), 0);
    if (graph.two_m <= 0) {
        out.labels = membership;
        return out;
    }

    std::mt19937_64 rng(seed);
    std::vector<int> community(n);
    std::iota(community.begin(), community.end(), 0);

    // `membership` maps original vertices to nodes of the current aggregate graph.
    while (true) {
        std::vector<int> order(static_cast<std::size_t>(graph.n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        Optimizer opt(graph, resolution);
        opt.move_nodes(community, order);
        int n_communities = renumber(community);
        if (n_communities == graph.n) {
            break;
        }

        std::vector<int> refined = opt.refine(community, order);
        int n_refined = *std::max_element(refined.begin(), refined.end()) + 1;
        if (n_refined == graph.n) {
            // Refinement kept every node apart; aggregating on it would not shrink the graph.
            refined = community;
            n_refined = n_communities;
        }

        // Aggregate nodes start in the community of their members.
        std::vector<int> next_community(static_cast<std::size_t>(n_refined));
        for (int v = 0; v < graph.n; ++v) {
            next_community[static_cast<std::size_t>(refined[static_cast<std::size_t>(v)])] = community[static_cast<std::size_t>(v)];
        }
        for (auto& m : membership) {
            m = refined[static_cast<std::size_t>(m)];
        }
        graph = aggregate(graph, refined, n_refined);
        community = std::move(next_community);
    }

    out.labels.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        out.labels[v] = community[static_cast<std::size_t>(membership[v])];
    }
    out.labels = canonical_labels(out.labels);
    return out;
}

}
