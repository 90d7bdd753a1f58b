#pragma once

// Stabilization diagrams over model order, consolidation of persistent
// poles into modes, and method-to-method comparison tables.

#include "flutterid/error.hpp"
#include "flutterid/frf.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace flutterid {

struct StabilityTolerances {
    double frequency = 0.01;  ///< relative
    double damping = 0.05;    ///< relative
};

struct DiagramPole {
    cplx pole;
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
    bool freq_stable = false;
    bool damp_stable = false;
    Eigen::VectorXcd shape;
    int track = -1;  ///< id shared by poles linked across consecutive orders
};

struct DiagramOrder {
    int order = 0;
    std::vector<DiagramPole> poles;
    std::optional<std::string> error;  ///< identification failure at this order
};

struct StabilizationDiagram {
    std::vector<DiagramOrder> entries;  ///< strictly increasing order
    StabilityTolerances tolerances;

    /// Last order whose identification succeeded, if any.
    const DiagramOrder* last_successful() const
    {
        for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
            if (!it->error) return &*it;
        }
        return nullptr;
    }
};

/// Orders lo, lo+step, ..., <= hi.
inline std::vector<int> order_range(int lo, int hi, int step)
{
    require(lo >= 1 && hi >= lo && step >= 1, "order range must satisfy 1 <= lo <= hi and step >= 1");
    std::vector<int> orders;
    for (int k = lo; k <= hi; k += step) orders.push_back(k);
    return orders;
}

using OrderIdentifier = std::function<ModalParameterSet(int order)>;

namespace stab_detail {

inline double rel(double a, double ref)
{
    return ref != 0.0 ? std::abs(a - ref) / std::abs(ref) : std::numeric_limits<double>::infinity();
}

template <class T>
double median_of(std::vector<T> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace stab_detail

/// Runs `identify` at every order (sorted, duplicates dropped) and flags
/// poles that reappear at the previous successful order. A throwing order
/// is recorded with its message and skipped.
inline StabilizationDiagram build_diagram(const OrderIdentifier& identify, std::vector<int> orders,
                                          const StabilityTolerances& tol = {})
{
    require(!orders.empty(), "order range is empty");
    std::sort(orders.begin(), orders.end());
    orders.erase(std::unique(orders.begin(), orders.end()), orders.end());

    StabilizationDiagram diagram;
    diagram.tolerances = tol;
    int next_track = 0;
    std::optional<std::size_t> previous;  // index of the last successful entry

    for (int k : orders) {
        DiagramOrder entry;
        entry.order = k;
        try {
            const ModalParameterSet modes = identify(k);
            for (const Mode& m : modes.modes) {
                entry.poles.push_back({m.pole, m.frequency_hz, m.damping_ratio, false, false, m.shape, -1});
            }
        } catch (const std::exception& e) {
            entry.error = e.what();
            diagram.entries.push_back(std::move(entry));
            continue;
        }

        // Link each pole to the closest damping-consistent pole of the
        // previous order; the nearest claimant keeps the track.
        struct Link {
            std::size_t current;
            int track;
            double distance;
        };
        std::vector<Link> links;
        if (previous) {
            const DiagramOrder& prev = diagram.entries[*previous];
            for (std::size_t i = 0; i < entry.poles.size(); ++i) {
                DiagramPole& p = entry.poles[i];
                double best = std::numeric_limits<double>::infinity();
                int best_track = -1;
                for (const DiagramPole& q : prev.poles) {
                    const double df = stab_detail::rel(p.frequency_hz, q.frequency_hz);
                    if (df > tol.frequency) continue;
                    p.freq_stable = true;
                    if (stab_detail::rel(p.damping_ratio, q.damping_ratio) <= tol.damping) {
                        p.damp_stable = true;
                        if (df < best) {
                            best = df;
                            best_track = q.track;
                        }
                    }
                }
                if (best_track >= 0) links.push_back({i, best_track, best});
            }
        }
        std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.distance < b.distance; });
        std::vector<int> claimed;
        for (const Link& l : links) {
            if (std::find(claimed.begin(), claimed.end(), l.track) != claimed.end()) continue;
            claimed.push_back(l.track);
            entry.poles[l.current].track = l.track;
        }
        for (DiagramPole& p : entry.poles) {
            if (p.track < 0) p.track = next_track++;
        }
        diagram.entries.push_back(std::move(entry));
        previous = diagram.entries.size() - 1;
    }
    return diagram;
}

/// Tracks spanning at least `min_consecutive` orders, merged when their
/// median frequencies agree, reduced to median (f, zeta). Clusters with no
/// pole near them at the highest successful order are dropped.
inline ModalParameterSet consolidate_modes(const StabilizationDiagram& diagram, int min_consecutive = 3,
                                           SourceMethod method = SourceMethod::external)
{
    require(!diagram.entries.empty(), "stabilization diagram is empty");
    require(min_consecutive >= 1, "min_consecutive must be >= 1");
    const StabilityTolerances& tol = diagram.tolerances;

    struct Track {
        std::vector<const DiagramPole*> members;
        int last_order = 0;
        double median_f = 0.0;
    };
    std::vector<Track> tracks;
    auto find_track = [&](int id) -> Track& {
        if (static_cast<std::size_t>(id) >= tracks.size()) tracks.resize(static_cast<std::size_t>(id) + 1);
        return tracks[static_cast<std::size_t>(id)];
    };
    for (const DiagramOrder& e : diagram.entries) {
        if (e.error) continue;
        for (const DiagramPole& p : e.poles) {
            Track& t = find_track(p.track);
            t.members.push_back(&p);
            t.last_order = e.order;
        }
    }

    std::vector<Track> kept;
    for (Track& t : tracks) {
        if (static_cast<int>(t.members.size()) < min_consecutive) continue;
        std::vector<double> f;
        for (const DiagramPole* p : t.members) f.push_back(p->frequency_hz);
        t.median_f = stab_detail::median_of(f);
        kept.push_back(std::move(t));
    }
    if (kept.empty()) throw NumericalError("no stable clusters");

    std::sort(kept.begin(), kept.end(), [](const Track& a, const Track& b) { return a.median_f < b.median_f; });
    std::vector<Track> clusters;
    for (Track& t : kept) {
        if (!clusters.empty() && stab_detail::rel(t.median_f, clusters.back().median_f) <= tol.frequency) {
            Track& c = clusters.back();
            c.members.insert(c.members.end(), t.members.begin(), t.members.end());
            c.last_order = std::max(c.last_order, t.last_order);
            std::vector<double> f;
            for (const DiagramPole* p : c.members) f.push_back(p->frequency_hz);
            c.median_f = stab_detail::median_of(f);
        } else {
            clusters.push_back(std::move(t));
        }
    }

    const DiagramOrder* top = diagram.last_successful();
    std::vector<Mode> modes;
    for (const Track& c : clusters) {
        std::vector<double> f, z;
        for (const DiagramPole* p : c.members) {
            f.push_back(p->frequency_hz);
            z.push_back(p->damping_ratio);
        }
        const double fm = stab_detail::median_of(f);
        const double zm = stab_detail::median_of(z);
        bool anchored = false;
        for (const DiagramPole& p : top->poles) anchored |= stab_detail::rel(fm, p.frequency_hz) <= tol.frequency;
        if (!anchored) continue;
        if (!(zm >= 0.0 && zm < 1.0)) continue;
        // Shape from the member closest to the median at the latest order.
        const DiagramPole* best = c.members.back();
        for (const DiagramPole* p : c.members) {
            if (std::abs(p->frequency_hz - fm) < std::abs(best->frequency_hz - fm) && p->shape.size() > 0) best = p;
        }
        modes.push_back(Mode::from_modal(fm, zm, best->shape));
    }
    if (modes.empty()) throw NumericalError("no stable clusters");
    return {std::move(modes), method};
}

/// CSV `order, f_hz, zeta, freq_stable, damp_stable`, one row per pole.
inline std::string diagram_csv(const StabilizationDiagram& diagram)
{
    std::ostringstream out;
    out.precision(10);
    out << "order, f_hz, zeta, freq_stable, damp_stable\n";
    for (const DiagramOrder& e : diagram.entries) {
        for (const DiagramPole& p : e.poles) {
            out << e.order << ", " << p.frequency_hz << ", " << p.damping_ratio << ", " << (p.freq_stable ? 1 : 0)
                << ", " << (p.damp_stable ? 1 : 0) << "\n";
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Method comparison

struct ComparisonRow {
    std::string mode_label;
    std::string quantity;  ///< "frequency_hz" or "damping_ratio"
    double value_a = 0.0;
    double value_b = 0.0;
    double relative_difference_percent = 0.0;  ///< 100 (b - a) / a
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    std::vector<std::size_t> unmatched_reference;
    std::vector<std::size_t> unmatched_candidate;
};

inline double percent_difference(double a, double b) { return 100.0 * (b - a) / a; }

/// Rounds to `decimals` places, half away from zero.
inline double round_to(double x, int decimals)
{
    const double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
}

/// Greedy nearest-frequency pairing within 10%, closest pairs first.
inline ComparisonReport compare_methods(const ModalParameterSet& reference, const ModalParameterSet& candidate,
                                        double pairing_tolerance = 0.10)
{
    require(!reference.empty() && !candidate.empty(), "both modal sets must be non-empty");
    struct Pair {
        std::size_t r, c;
        double d;
    };
    std::vector<Pair> pairs;
    for (std::size_t r = 0; r < reference.size(); ++r) {
        for (std::size_t c = 0; c < candidate.size(); ++c) {
            const double d = stab_detail::rel(candidate[c].frequency_hz, reference[r].frequency_hz);
            if (d <= pairing_tolerance) pairs.push_back({r, c, d});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<std::optional<std::size_t>> match(reference.size());
    std::vector<bool> used(candidate.size(), false);
    for (const Pair& p : pairs) {
        if (match[p.r] || used[p.c]) continue;
        match[p.r] = p.c;
        used[p.c] = true;
    }

    ComparisonReport report;
    for (std::size_t r = 0; r < reference.size(); ++r) {
        if (!match[r]) {
            report.unmatched_reference.push_back(r);
            continue;
        }
        const Mode& a = reference[r];
        const Mode& b = candidate[*match[r]];
        const std::string label = "mode " + std::to_string(r + 1);
        report.rows.push_back({label, "frequency_hz", a.frequency_hz, b.frequency_hz,
                               percent_difference(a.frequency_hz, b.frequency_hz)});
        report.rows.push_back({label, "damping_ratio", a.damping_ratio, b.damping_ratio,
                               percent_difference(a.damping_ratio, b.damping_ratio)});
    }
    for (std::size_t c = 0; c < candidate.size(); ++c) {
        if (!used[c]) report.unmatched_candidate.push_back(c);
    }
    return report;
}

} // namespace flutterid
