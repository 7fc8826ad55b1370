#pragma once

// Coalition machinery: enumerate k-subsets of firms that co-bid in at least
// min_joint tenders, extract their joint bids, and fold the per-tender screen
// vectors into coalition-based features.
//
// Feature order is part of the contract: screen-major, statistic-minor, with
// screens in kScreenNames order and statistics in kBaseStats / kExtendedStats
// order. Column j of every export means the same thing everywhere.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "coalscreen/dataset.hpp"
#include "coalscreen/parallel.hpp"
#include "coalscreen/screens.hpp"

namespace coalscreen {

struct Coalition {
    std::vector<int> members;    // firm ordinals, ascending (= lexicographic firm ids)
    std::vector<int> tender_ids; // tender ordinals where every member bid, ascending

    bool operator==(const Coalition&) const = default;
};

enum class StatSet { Base, Extended };

inline constexpr std::array<const char*, 4> kBaseStats = {"mean", "median", "min", "max"};
inline constexpr std::array<const char*, 10> kExtendedStats = {
    "mean", "median", "min", "max", "p5", "p10", "p25", "p75", "p90", "p95"};

inline std::size_t stats_per_screen(StatSet set) { return set == StatSet::Base ? 4 : 10; }

inline std::vector<std::string> feature_names(StatSet set) {
    std::vector<std::string> names;
    names.reserve(kNumScreens * stats_per_screen(set));
    for (const char* screen : kScreenNames) {
        if (set == StatSet::Base)
            for (const char* stat : kBaseStats) names.push_back(std::string(screen) + "_" + stat);
        else
            for (const char* stat : kExtendedStats) names.push_back(std::string(screen) + "_" + stat);
    }
    return names;
}

enum class Label : int { Collusive = 1, Competitive = 0, Mixed = 2 };

inline const char* label_name(Label l) {
    switch (l) {
        case Label::Collusive: return "collusive";
        case Label::Competitive: return "competitive";
        case Label::Mixed: return "mixed";
    }
    return "?";
}

inline Label label_from_name(const std::string& s) {
    if (s == "collusive") return Label::Collusive;
    if (s == "competitive") return Label::Competitive;
    if (s == "mixed") return Label::Mixed;
    throw DataError("unknown label '" + s + "'");
}

struct FeatureRow {
    std::vector<int> members;
    int n_tenders = 0;
    Label label = Label::Mixed;
    std::vector<double> x;
};

struct FeatureTable {
    int k = 3;
    StatSet stat_set = StatSet::Base;
    std::vector<std::string> names;    // feature column names
    std::vector<std::string> firm_ids; // ordinal -> id (may be empty after CSV import of raw ids)
    std::vector<FeatureRow> rows;

    std::size_t n_features() const { return names.size(); }
    std::string member_id(int ordinal) const {
        return firm_ids.empty() ? std::to_string(ordinal) : firm_ids[static_cast<std::size_t>(ordinal)];
    }
};

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t popcount_and(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < words; ++i) n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    return n;
}

inline void and_into(const std::uint64_t* a, const std::uint64_t* b, std::uint64_t* out, std::size_t words) {
    for (std::size_t i = 0; i < words; ++i) out[i] = a[i] & b[i];
}

inline std::vector<int> bits_to_ids(const std::uint64_t* w, std::size_t words) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < words; ++i) {
        std::uint64_t word = w[i];
        while (word) {
            const int b = std::countr_zero(word);
            ids.push_back(static_cast<int>(i * 64) + b);
            word &= word - 1;
        }
    }
    return ids;
}

} // namespace detail

/// All k-subsets of firms whose participation bitsets intersect in at least
/// min_joint tenders. Output is lexicographic by members regardless of the
/// worker count.
inline std::vector<Coalition> enumerate_coalitions(const ParticipationIndex& index, int k, std::size_t min_joint = 3,
                                                   int workers = 1) {
    if (k != 3 && k != 4) throw DataError("coalition size k must be 3 or 4, got " + std::to_string(k));
    const std::size_t nf = index.n_firms();
    const std::size_t words = index.words_per_firm();
    std::vector<std::vector<Coalition>> per_first(nf);

    auto scan_first = [&](std::size_t i) {
        std::vector<std::uint64_t> ij(words), ijk(words);
        auto& out = per_first[i];
        const std::uint64_t* wi = index.firm_bits(i);
        if (index.popcount(i) < min_joint) return;
        for (std::size_t j = i + 1; j < nf; ++j) {
            const std::uint64_t* wj = index.firm_bits(j);
            if (detail::popcount_and(wi, wj, words) < min_joint) continue;
            detail::and_into(wi, wj, ij.data(), words);
            for (std::size_t m = j + 1; m < nf; ++m) {
                const std::uint64_t* wm = index.firm_bits(m);
                if (detail::popcount_and(ij.data(), wm, words) < min_joint) continue;
                if (k == 3) {
                    detail::and_into(ij.data(), wm, ijk.data(), words);
                    out.push_back(Coalition{{static_cast<int>(i), static_cast<int>(j), static_cast<int>(m)},
                                            detail::bits_to_ids(ijk.data(), words)});
                } else {
                    detail::and_into(ij.data(), wm, ijk.data(), words);
                    for (std::size_t q = m + 1; q < nf; ++q) {
                        const std::uint64_t* wq = index.firm_bits(q);
                        if (detail::popcount_and(ijk.data(), wq, words) < min_joint) continue;
                        std::vector<std::uint64_t> all(words);
                        detail::and_into(ijk.data(), wq, all.data(), words);
                        out.push_back(Coalition{{static_cast<int>(i), static_cast<int>(j), static_cast<int>(m),
                                                 static_cast<int>(q)},
                                                detail::bits_to_ids(all.data(), words)});
                    }
                }
            }
        }
    };
    parallel_for(nf, workers, scan_first);

    std::vector<Coalition> result;
    std::size_t total = 0;
    for (const auto& v : per_first) total += v.size();
    result.reserve(total);
    for (auto& v : per_first) {
        result.insert(result.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
        v.clear();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Extraction, aggregation, labeling
// ---------------------------------------------------------------------------

/// Per-tender (sorted by firm ordinal) bid table for fast member lookup.
class TenderBidLookup {
public:
    explicit TenderBidLookup(const Dataset& ds) {
        entries_.resize(ds.n_tenders());
        for (std::size_t t = 0; t < ds.tenders().size(); ++t) {
            auto& e = entries_[t];
            for (const auto& row : ds.tenders()[t].rows)
                e.push_back(Entry{ds.firm_ordinal(row.firm_id), row.bid, row.rigged});
            std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.firm < b.firm; });
        }
    }

    /// Bid of `firm` in tender `t`; throws on internal inconsistency.
    const auto& find(std::size_t t, int firm) const {
        const auto& e = entries_[t];
        auto it = std::lower_bound(e.begin(), e.end(), firm,
                                   [](const Entry& a, int f) { return a.firm < f; });
        if (it == e.end() || it->firm != firm)
            throw std::logic_error("participation index lists firm " + std::to_string(firm) + " in tender " +
                                   std::to_string(t) + " but no bid row exists");
        return *it;
    }

    struct Entry {
        int firm;
        double bid;
        bool rigged;
    };

private:
    std::vector<std::vector<Entry>> entries_;
};

/// Screen vectors of exactly the members' bids, one per joint tender.
inline std::vector<ScreenVector> coalition_screens(const Coalition& c, const Dataset& ds,
                                                   const TenderBidLookup& lookup) {
    std::vector<ScreenVector> out;
    out.reserve(c.tender_ids.size());
    std::vector<double> bids(c.members.size());
    for (int t : c.tender_ids) {
        for (std::size_t m = 0; m < c.members.size(); ++m)
            bids[m] = lookup.find(static_cast<std::size_t>(t), c.members[m]).bid;
        out.push_back(screen_vector(bids));
    }
    return out;
}

inline std::vector<ScreenVector> coalition_screens(const Coalition& c, const Dataset& ds) {
    return coalition_screens(c, ds, TenderBidLookup(ds));
}

namespace detail {

/// Percentile by linear interpolation between closest ranks (inclusive),
/// p in [0, 100]; input must be sorted.
inline double percentile_sorted(const std::vector<double>& v, double p) {
    const std::size_t n = v.size();
    if (n == 1) return v[0];
    const double h = (static_cast<double>(n) - 1.0) * p / 100.0;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return v[n - 1];
    const double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

} // namespace detail

/// Summary statistics of the per-tender screens; base = 36 features,
/// extended = 90. Degenerate-flagged values participate with their
/// convention values.
inline std::vector<double> aggregate(const std::vector<ScreenVector>& screens, StatSet set) {
    if (screens.empty()) throw DataError("aggregate: no screen vectors");
    const std::size_t n = screens.size();
    std::vector<double> features;
    features.reserve(kNumScreens * stats_per_screen(set));
    std::vector<double> values(n);
    for (int s = 0; s < kNumScreens; ++s) {
        for (std::size_t i = 0; i < n; ++i) values[i] = screens[i].value(static_cast<Screen>(s));
        std::sort(values.begin(), values.end());
        double sum = 0.0;
        for (double v : values) sum += v;
        const double mean = sum / static_cast<double>(n);
        const double median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
        features.push_back(mean);
        features.push_back(median);
        features.push_back(values.front());
        features.push_back(values.back());
        if (set == StatSet::Extended)
            for (double p : {5.0, 10.0, 25.0, 75.0, 90.0, 95.0})
                features.push_back(detail::percentile_sorted(values, p));
    }
    return features;
}

/// Collusive when every member's flag is 1 in every joint tender,
/// competitive when every flag is 0, mixed otherwise.
inline Label label_coalition(const Coalition& c, const Dataset& ds, const TenderBidLookup& lookup) {
    bool any0 = false, any1 = false;
    for (int t : c.tender_ids)
        for (int firm : c.members)
            (lookup.find(static_cast<std::size_t>(t), firm).rigged ? any1 : any0) = true;
    if (any1 && !any0) return Label::Collusive;
    if (any0 && !any1) return Label::Competitive;
    return Label::Mixed;
}

inline Label label_coalition(const Coalition& c, const Dataset& ds) {
    return label_coalition(c, ds, TenderBidLookup(ds));
}

/// enumerate -> extract -> screen -> aggregate -> label. Mixed coalitions are
/// kept in the table (training excludes them downstream).
inline FeatureTable build_feature_table(const Dataset& ds, int k = 3, std::size_t min_joint = 3,
                                        StatSet set = StatSet::Base, int workers = 1) {
    FeatureTable table;
    table.k = k;
    table.stat_set = set;
    table.names = feature_names(set);
    table.firm_ids = ds.firms();
    if (ds.n_tenders() == 0) return table;

    const auto index = build_index(ds);
    const auto coalitions = enumerate_coalitions(index, k, min_joint, workers);
    const TenderBidLookup lookup(ds);
    table.rows.resize(coalitions.size());
    parallel_for(coalitions.size(), workers, [&](std::size_t i) {
        const auto& c = coalitions[i];
        FeatureRow row;
        row.members = c.members;
        row.n_tenders = static_cast<int>(c.tender_ids.size());
        row.x = aggregate(coalition_screens(c, ds, lookup), set);
        row.label = label_coalition(c, ds, lookup);
        table.rows[i] = std::move(row);
    });
    return table;
}

// ---------------------------------------------------------------------------
// Feature table CSV
// ---------------------------------------------------------------------------

inline void write_feature_csv(std::ostream& out, const FeatureTable& table) {
    out << "coalition_id";
    for (int m = 1; m <= table.k; ++m) out << ",member_" << m;
    out << ",n_tenders,label";
    for (const auto& name : table.names) out << ',' << name;
    out << '\n';
    char buf[64];
    auto put = [&](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    };
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        out << (i + 1);
        for (int m : row.members) out << ',' << table.member_id(m);
        out << ',' << row.n_tenders << ',' << label_name(row.label);
        for (double v : row.x) put(v);
        out << '\n';
    }
}

/// Reads a feature CSV produced by write_feature_csv. The label column is
/// optional (score-time input); absent labels come back as Mixed.
inline FeatureTable read_feature_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty feature file: missing header");
    const auto header = detail::split_csv_line(line, 1);
    if (header.empty() || header[0] != "coalition_id")
        throw DataError("feature file must start with a coalition_id column");
    int k = 0;
    std::size_t col = 1;
    while (col < header.size() && header[col] == "member_" + std::to_string(k + 1)) {
        ++k;
        ++col;
    }
    if (k == 0) throw DataError("feature file has no member_* columns");
    if (col >= header.size() || header[col] != "n_tenders") throw DataError("feature file is missing n_tenders");
    ++col;
    bool has_label = col < header.size() && header[col] == "label";
    if (has_label) ++col;
    FeatureTable table;
    table.k = k;
    table.names.assign(header.begin() + static_cast<std::ptrdiff_t>(col), header.end());
    if (table.names.empty()) throw DataError("feature file has no feature columns");
    table.stat_set = table.names.size() == 90u ? StatSet::Extended : StatSet::Base;

    std::map<std::string, int> ids;
    auto intern = [&](const std::string& id) {
        auto [it, inserted] = ids.try_emplace(id, static_cast<int>(ids.size()));
        return it->second;
    };
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line, line_no);
        if (fields.size() != header.size())
            throw DataError("feature file line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        FeatureRow row;
        std::size_t f = 1;
        for (int m = 0; m < k; ++m) row.members.push_back(intern(fields[f++]));
        row.n_tenders = std::stoi(fields[f++]);
        row.label = has_label ? label_from_name(fields[f++]) : Label::Mixed;
        row.x.reserve(table.names.size());
        for (; f < fields.size(); ++f) {
            double v = 0.0;
            const auto& s = fields[f];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size())
                throw DataError("feature file line " + std::to_string(line_no) + ": bad number '" + s + "'");
            row.x.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    table.firm_ids.resize(ids.size());
    for (const auto& [id, ord] : ids) table.firm_ids[static_cast<std::size_t>(ord)] = id;
    return table;
}

} // namespace coalscreen
