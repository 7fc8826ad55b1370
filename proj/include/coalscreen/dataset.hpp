#pragma once

// Procurement bid data: one row per (tender, firm) with the submitted bid and
// a binary cartel flag. The dataset is immutable once constructed; everything
// downstream (screens, coalitions, learners) reads from it concurrently.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "coalscreen/errors.hpp"

namespace coalscreen {

struct BidRow {
    std::string tender_id;
    std::string firm_id;
    double bid = 0.0; // strictly positive; price or discount points as submitted
    bool rigged = false;

    bool operator==(const BidRow&) const = default;
};

struct Tender {
    std::string id;
    std::vector<BidRow> rows; // firm ids distinct within a tender

    bool operator==(const Tender&) const = default;
};

/// Column-name mapping for the input CSV.
struct CsvSchema {
    std::string tender_id = "tender_id";
    std::string firm_id = "firm_id";
    std::string bid = "bid";
    std::string rigged_flag = "rigged_flag";
};

struct Provenance {
    std::string source;
    std::string parsed_at; // ISO-8601, empty when not recorded
};

class Dataset {
public:
    Dataset() = default;

    /// Groups rows by tender (tender order = first appearance, row order
    /// preserved) and dedupes the firm list (sorted ascending).
    static Dataset from_rows(std::vector<BidRow> rows, Provenance prov = {}) {
        Dataset ds;
        ds.provenance_ = std::move(prov);
        std::unordered_map<std::string, std::size_t> tender_pos;
        std::set<std::string> firm_set;
        for (auto& row : rows) {
            if (!(row.bid > 0.0)) throw DataError("bid must be strictly positive (tender " + row.tender_id + ", firm " + row.firm_id + ")");
            firm_set.insert(row.firm_id);
            auto [it, inserted] = tender_pos.try_emplace(row.tender_id, ds.tenders_.size());
            if (inserted) ds.tenders_.push_back(Tender{row.tender_id, {}});
            auto& tender = ds.tenders_[it->second];
            for (const auto& existing : tender.rows)
                if (existing.firm_id == row.firm_id)
                    throw DataError("duplicate (tender, firm) pair: (" + row.tender_id + ", " + row.firm_id + ")");
            tender.rows.push_back(std::move(row));
        }
        ds.firms_.assign(firm_set.begin(), firm_set.end());
        for (std::size_t i = 0; i < ds.firms_.size(); ++i) ds.firm_ordinal_[ds.firms_[i]] = static_cast<int>(i);
        return ds;
    }

    const std::vector<Tender>& tenders() const { return tenders_; }
    const std::vector<std::string>& firms() const { return firms_; }
    const Provenance& provenance() const { return provenance_; }

    std::size_t n_tenders() const { return tenders_.size(); }
    std::size_t n_firms() const { return firms_.size(); }

    /// Ordinal of a firm id in the sorted firm list; -1 when absent.
    int firm_ordinal(std::string_view id) const {
        auto it = firm_ordinal_.find(std::string(id));
        return it == firm_ordinal_.end() ? -1 : it->second;
    }

    bool same_content(const Dataset& other) const {
        return tenders_ == other.tenders_ && firms_ == other.firms_;
    }

private:
    std::vector<Tender> tenders_;
    std::vector<std::string> firms_;
    std::unordered_map<std::string, int> firm_ordinal_;
    Provenance provenance_;
};

// ---------------------------------------------------------------------------
// CSV input / output
// ---------------------------------------------------------------------------

namespace detail {

/// Minimal RFC-4180 field splitter: quoted fields may contain commas and
/// doubled quotes. One physical line per record (no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
    out.push_back(std::move(field));
    return out;
}

inline double parse_positive_bid(const std::string& text, std::size_t line_no) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw DataError("line " + std::to_string(line_no) + ": bid is not a number: '" + text + "'");
    if (!(value > 0.0))
        throw DataError("line " + std::to_string(line_no) + ": bid must be > 0, got '" + text + "'");
    return value;
}

inline bool parse_flag(const std::string& text, std::size_t line_no) {
    if (text == "0") return false;
    if (text == "1") return true;
    throw DataError("line " + std::to_string(line_no) + ": rigged_flag must be 0 or 1, got '" + text + "'");
}

} // namespace detail

/// Parse header-first CSV into a Dataset. Errors carry 1-based line numbers.
inline Dataset parse_dataset(std::istream& in, const CsvSchema& schema = {}, std::string source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input: missing header");
    // Strip a UTF-8 BOM if present.
    if (line.size() >= 3 && line[0] == '\xEF' && line[1] == '\xBB' && line[2] == '\xBF') line.erase(0, 3);
    const auto header = detail::split_csv_line(line, 1);
    auto column = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int c_tender = column(schema.tender_id);
    const int c_firm = column(schema.firm_id);
    const int c_bid = column(schema.bid);
    const int c_flag = column(schema.rigged_flag);
    for (const auto& [col, name] : {std::pair{c_tender, schema.tender_id},
                                    {c_firm, schema.firm_id},
                                    {c_bid, schema.bid},
                                    {c_flag, schema.rigged_flag}})
        if (col < 0) throw DataError("missing required column '" + name + "' in header");

    std::vector<BidRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line, line_no);
        const std::size_t needed = static_cast<std::size_t>(std::max({c_tender, c_firm, c_bid, c_flag})) + 1;
        if (fields.size() < needed)
            throw DataError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(needed) +
                            " fields, got " + std::to_string(fields.size()));
        BidRow row;
        row.tender_id = fields[static_cast<std::size_t>(c_tender)];
        row.firm_id = fields[static_cast<std::size_t>(c_firm)];
        if (row.tender_id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty tender_id");
        if (row.firm_id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty firm_id");
        row.bid = detail::parse_positive_bid(fields[static_cast<std::size_t>(c_bid)], line_no);
        row.rigged = detail::parse_flag(fields[static_cast<std::size_t>(c_flag)], line_no);
        rows.push_back(std::move(row));
    }
    try {
        return Dataset::from_rows(std::move(rows), Provenance{std::move(source), {}});
    } catch (const DataError&) {
        throw; // from_rows errors (duplicates) already carry the pair
    }
}

inline Dataset parse_dataset(const std::string& text, const CsvSchema& schema = {}, std::string source = "<string>") {
    std::istringstream in(text);
    return parse_dataset(in, schema, std::move(source));
}

/// Canonical CSV writer: standard column names, row order as stored, full
/// double round-trip precision.
inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    out << "tender_id,firm_id,bid,rigged_flag\n";
    char buf[64];
    for (const auto& tender : ds.tenders()) {
        for (const auto& row : tender.rows) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), row.bid);
            out << row.tender_id << ',' << row.firm_id << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf))
                << ',' << (row.rigged ? '1' : '0') << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationReport {
    std::size_t n_tenders = 0;
    std::size_t n_firms = 0;
    std::size_t n_rows = 0;
    std::vector<std::string> tenders_below_three_bidders; // unusable for 3-coalitions
    std::size_t n_mixed_flag_tenders = 0;                 // both flag values within one tender
    std::vector<std::string> warnings;
};

inline ValidationReport validate(const Dataset& ds) {
    ValidationReport report;
    report.n_tenders = ds.n_tenders();
    report.n_firms = ds.n_firms();
    for (const auto& tender : ds.tenders()) {
        report.n_rows += tender.rows.size();
        if (tender.rows.size() < 3) report.tenders_below_three_bidders.push_back(tender.id);
        bool any0 = false, any1 = false;
        for (const auto& row : tender.rows) (row.rigged ? any1 : any0) = true;
        if (any0 && any1) ++report.n_mixed_flag_tenders;
    }
    if (report.n_tenders == 0) report.warnings.push_back("dataset is empty");
    if (!report.tenders_below_three_bidders.empty())
        report.warnings.push_back(std::to_string(report.tenders_below_three_bidders.size()) +
                                  " tender(s) have fewer than 3 bidders and cannot host 3-firm coalitions");
    return report;
}

// ---------------------------------------------------------------------------
// Participation index
// ---------------------------------------------------------------------------

/// Per-firm bitset over tender ordinals (bit t set <=> the firm bid in the
/// t-th tender, input order). Pure function of the dataset.
class ParticipationIndex {
public:
    ParticipationIndex() = default;

    std::size_t n_firms() const { return n_firms_; }
    std::size_t n_tenders() const { return n_tenders_; }
    std::size_t words_per_firm() const { return words_; }

    const std::uint64_t* firm_bits(std::size_t firm) const { return bits_.data() + firm * words_; }

    bool bit(std::size_t firm, std::size_t tender) const {
        return (firm_bits(firm)[tender >> 6] >> (tender & 63)) & 1u;
    }

    std::size_t popcount(std::size_t firm) const {
        std::size_t n = 0;
        const std::uint64_t* w = firm_bits(firm);
        for (std::size_t i = 0; i < words_; ++i) n += static_cast<std::size_t>(std::popcount(w[i]));
        return n;
    }

    friend ParticipationIndex build_index(const Dataset& ds);

private:
    std::size_t n_firms_ = 0;
    std::size_t n_tenders_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> bits_; // firm-major

    void set_bit(std::size_t firm, std::size_t tender) {
        bits_[firm * words_ + (tender >> 6)] |= std::uint64_t{1} << (tender & 63);
    }
};

inline ParticipationIndex build_index(const Dataset& ds) {
    ParticipationIndex index;
    index.n_firms_ = ds.n_firms();
    index.n_tenders_ = ds.n_tenders();
    index.words_ = (index.n_tenders_ + 63) / 64;
    if (index.words_ == 0) index.words_ = 1;
    index.bits_.assign(index.n_firms_ * index.words_, 0);
    for (std::size_t t = 0; t < ds.tenders().size(); ++t)
        for (const auto& row : ds.tenders()[t].rows)
            index.set_bit(static_cast<std::size_t>(ds.firm_ordinal(row.firm_id)), t);
    return index;
}

} // namespace coalscreen
