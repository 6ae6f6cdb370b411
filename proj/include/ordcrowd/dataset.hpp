#ifndef ORDCROWD_DATASET_HPP
#define ORDCROWD_DATASET_HPP

// Sparse multi-annotator ordinal ratings: the rating scale, the indexed
// ratings table, category maps and (partial) ground truth, plus TSV I/O.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ordcrowd/errors.hpp"

namespace ordcrowd {

/// Ordered label values v_1 < ... < v_K with bin thresholds b_0 < ... < b_K,
/// such that v_k lies inside [b_{k-1}, b_k). Levels are 1-based.
class OrdinalScale {
public:
    OrdinalScale(std::vector<double> values, std::vector<double> thresholds)
        : values_(std::move(values)), thresholds_(std::move(thresholds)) {
        const std::size_t k = values_.size();
        if (k < 2) throw InvalidScale("ordinal scale needs at least two levels");
        if (thresholds_.size() != k + 1)
            throw InvalidScale("ordinal scale needs K+1 thresholds");
        for (std::size_t i = 1; i < k; ++i)
            if (!(values_[i - 1] < values_[i]))
                throw InvalidScale("scale values must be strictly increasing");
        for (std::size_t i = 1; i <= k; ++i)
            if (!(thresholds_[i - 1] < thresholds_[i]))
                throw InvalidScale("thresholds must be strictly increasing");
        for (std::size_t i = 0; i < k; ++i)
            if (!(thresholds_[i] < values_[i] && values_[i] < thresholds_[i + 1]))
                throw InvalidScale("each value must lie strictly inside its bin");
    }

    /// v_k = k, b_k = k + 0.5 (so b_0 = 0.5).
    static OrdinalScale standard(int levels) {
        if (levels < 2) throw InvalidScale("ordinal scale needs at least two levels");
        std::vector<double> v(static_cast<std::size_t>(levels));
        std::vector<double> b(static_cast<std::size_t>(levels) + 1);
        for (int k = 0; k < levels; ++k) v[static_cast<std::size_t>(k)] = k + 1.0;
        for (int k = 0; k <= levels; ++k) b[static_cast<std::size_t>(k)] = k + 0.5;
        return OrdinalScale(std::move(v), std::move(b));
    }

    int levels() const noexcept { return static_cast<int>(values_.size()); }
    double value(int level) const { return values_.at(static_cast<std::size_t>(level - 1)); }
    double lower(int level) const { return thresholds_.at(static_cast<std::size_t>(level - 1)); }
    double upper(int level) const { return thresholds_.at(static_cast<std::size_t>(level)); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> thresholds() const noexcept { return thresholds_; }

    double mean_value() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v;
        return s / static_cast<double>(values_.size());
    }

    /// Smallest k with b_k > x; values outside [b_0, b_K) clamp to 1 or K.
    int level_of(double x) const noexcept {
        const int k = levels();
        for (int level = 1; level <= k; ++level)
            if (x < thresholds_[static_cast<std::size_t>(level)]) return level;
        return k;
    }

private:
    std::vector<double> values_;
    std::vector<double> thresholds_;
};

struct Rating {
    std::size_t instance;
    std::size_t annotator;
    int level;
};

/// Immutable, indexed set of observed ratings. Ids are dense 0-based indices;
/// the original string ids are retained for output.
class RatingsTable {
public:
    RatingsTable() = default;

    RatingsTable(int levels, std::vector<std::string> instance_ids,
                 std::vector<std::string> annotator_ids, std::vector<Rating> entries)
        : levels_(levels), instance_ids_(std::move(instance_ids)),
          annotator_ids_(std::move(annotator_ids)), entries_(std::move(entries)) {
        if (levels_ < 2) throw InvalidScale("ratings table needs at least two levels");
        by_instance_.assign(instance_ids_.size(), {});
        by_annotator_.assign(annotator_ids_.size(), {});
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const Rating& r = entries_[i];
            if (r.instance >= instance_ids_.size() || r.annotator >= annotator_ids_.size())
                throw Error("rating references an unknown instance or annotator index");
            if (r.level < 1 || r.level > levels_)
                throw InvalidLevel("rating " + std::to_string(r.level) + " outside 1.." +
                                   std::to_string(levels_));
            const std::uint64_t key = (static_cast<std::uint64_t>(r.annotator) << 32) |
                                      static_cast<std::uint64_t>(r.instance);
            if (!seen.insert(key).second)
                throw DuplicateRating("annotator '" + annotator_ids_[r.annotator] +
                                      "' rated instance '" + instance_ids_[r.instance] +
                                      "' more than once");
            by_instance_[r.instance].push_back(i);
            by_annotator_[r.annotator].push_back(i);
        }
        for (std::size_t m = 0; m < instance_ids_.size(); ++m)
            instance_index_.emplace(instance_ids_[m], m);
        for (std::size_t n = 0; n < annotator_ids_.size(); ++n)
            annotator_index_.emplace(annotator_ids_[n], n);
        if (instance_index_.size() != instance_ids_.size())
            throw Error("duplicate instance id");
        if (annotator_index_.size() != annotator_ids_.size())
            throw Error("duplicate annotator id");
    }

    int levels() const noexcept { return levels_; }
    std::size_t instances() const noexcept { return instance_ids_.size(); }
    std::size_t annotators() const noexcept { return annotator_ids_.size(); }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const std::vector<Rating>& entries() const noexcept { return entries_; }
    const Rating& entry(std::size_t i) const { return entries_[i]; }

    /// Entry indices of the ratings given to instance m.
    std::span<const std::size_t> by_instance(std::size_t m) const { return by_instance_[m]; }
    /// Entry indices of the ratings given by annotator n.
    std::span<const std::size_t> by_annotator(std::size_t n) const { return by_annotator_[n]; }

    const std::string& instance_id(std::size_t m) const { return instance_ids_[m]; }
    const std::string& annotator_id(std::size_t n) const { return annotator_ids_[n]; }
    const std::vector<std::string>& instance_ids() const noexcept { return instance_ids_; }
    const std::vector<std::string>& annotator_ids() const noexcept { return annotator_ids_; }

    std::optional<std::size_t> find_instance(std::string_view id) const {
        auto it = instance_index_.find(std::string(id));
        if (it == instance_index_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<std::size_t> find_annotator(std::string_view id) const {
        auto it = annotator_index_.find(std::string(id));
        if (it == annotator_index_.end()) return std::nullopt;
        return it->second;
    }

    /// Mean of |L| / N, the average load of an annotator.
    double mean_annotator_load() const noexcept {
        return annotators() == 0 ? 0.0
                                 : static_cast<double>(size()) / static_cast<double>(annotators());
    }

private:
    int levels_ = 2;
    std::vector<std::string> instance_ids_;
    std::vector<std::string> annotator_ids_;
    std::vector<Rating> entries_;
    std::vector<std::vector<std::size_t>> by_instance_;
    std::vector<std::vector<std::size_t>> by_annotator_;
    std::unordered_map<std::string, std::size_t> instance_index_;
    std::unordered_map<std::string, std::size_t> annotator_index_;
};

/// Accumulates ratings keyed by string ids, assigning dense indices in order
/// of first appearance.
class RatingsTableBuilder {
public:
    explicit RatingsTableBuilder(int levels) : levels_(levels) {}

    std::size_t add_instance(const std::string& id) { return intern(id, instances_, instance_ids_); }
    std::size_t add_annotator(const std::string& id) { return intern(id, annotators_, annotator_ids_); }

    void add(const std::string& instance, const std::string& annotator, int level) {
        if (level < 1 || level > levels_)
            throw InvalidLevel("rating " + std::to_string(level) + " outside 1.." +
                               std::to_string(levels_));
        const std::size_t m = add_instance(instance);
        const std::size_t n = add_annotator(annotator);
        const std::uint64_t key = (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint64_t>(m);
        if (!pairs_.insert(key).second)
            throw DuplicateRating("annotator '" + annotator + "' rated instance '" + instance +
                                  "' more than once");
        entries_.push_back({m, n, level});
    }

    RatingsTable build() && {
        return RatingsTable(levels_, std::move(instance_ids_), std::move(annotator_ids_),
                            std::move(entries_));
    }

private:
    static std::size_t intern(const std::string& id, std::unordered_map<std::string, std::size_t>& index,
                              std::vector<std::string>& ids) {
        auto [it, inserted] = index.emplace(id, ids.size());
        if (inserted) ids.push_back(id);
        return it->second;
    }

    int levels_;
    std::unordered_map<std::string, std::size_t> instances_;
    std::unordered_map<std::string, std::size_t> annotators_;
    std::vector<std::string> instance_ids_;
    std::vector<std::string> annotator_ids_;
    std::vector<Rating> entries_;
    std::unordered_set<std::uint64_t> pairs_;
};

/// Assignment of every instance to one of C categories sharing a difficulty.
class CategoryMap {
public:
    CategoryMap() = default;

    CategoryMap(const RatingsTable& table, std::vector<std::size_t> category_of,
                std::vector<std::string> category_ids)
        : category_of_(std::move(category_of)), category_ids_(std::move(category_ids)) {
        if (category_of_.size() != table.instances())
            throw IncompleteCategoryMap("category map does not cover every instance");
        ratings_.assign(category_ids_.size(), {});
        members_.assign(category_ids_.size(), {});
        for (std::size_t m = 0; m < category_of_.size(); ++m) {
            if (category_of_[m] >= category_ids_.size())
                throw IncompleteCategoryMap("category index out of range");
            members_[category_of_[m]].push_back(m);
        }
        for (std::size_t i = 0; i < table.size(); ++i)
            ratings_[category_of_[table.entry(i).instance]].push_back(i);
    }

    std::size_t categories() const noexcept { return category_ids_.size(); }
    std::size_t category_of(std::size_t m) const { return category_of_[m]; }
    const std::string& category_id(std::size_t c) const { return category_ids_[c]; }
    /// Entry indices of ratings on instances of category c.
    std::span<const std::size_t> ratings(std::size_t c) const { return ratings_[c]; }
    std::span<const std::size_t> members(std::size_t c) const { return members_[c]; }

private:
    std::vector<std::size_t> category_of_;
    std::vector<std::string> category_ids_;
    std::vector<std::vector<std::size_t>> ratings_;
    std::vector<std::vector<std::size_t>> members_;
};

enum class Granularity { single, per_instance };

inline CategoryMap build_category_map(const RatingsTable& table, Granularity granularity) {
    const std::size_t m_count = table.instances();
    if (granularity == Granularity::single)
        return CategoryMap(table, std::vector<std::size_t>(m_count, 0), {"all"});
    std::vector<std::size_t> cat(m_count);
    for (std::size_t m = 0; m < m_count; ++m) cat[m] = m;
    return CategoryMap(table, std::move(cat), table.instance_ids());
}

/// Ground-truth values for a subset of the instances.
struct GroundTruth {
    std::vector<double> z;
    std::vector<bool> covered;

    std::vector<std::size_t> coverage() const {
        std::vector<std::size_t> out;
        for (std::size_t m = 0; m < covered.size(); ++m)
            if (covered[m]) out.push_back(m);
        return out;
    }

    static GroundTruth full(std::vector<double> values) {
        GroundTruth t;
        t.covered.assign(values.size(), true);
        t.z = std::move(values);
        return t;
    }
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

/// Calls fn(fields, line_number) for every data row of a headered TSV file.
/// Blank and '#' lines are skipped; the first remaining line must equal header.
template <typename Fn>
void read_tsv(std::istream& in, std::span<const std::string_view> header, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto fields = split_tabs(line);
        if (!seen_header) {
            if (!std::equal(fields.begin(), fields.end(), header.begin(), header.end())) {
                std::string expected;
                for (auto h : header) expected += (expected.empty() ? "" : "\\t") + std::string(h);
                throw ParseError("expected header '" + expected + "'", line_no);
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " tab-separated fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        for (auto f : fields)
            if (f.empty()) throw ParseError("empty field", line_no);
        fn(fields, line_no);
    }
    if (!seen_header) throw ParseError("missing header line");
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return in;
}

inline int parse_int(std::string_view s, std::size_t line_no) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("not an integer: '" + std::string(s) + "'", line_no);
    return v;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    std::string tmp(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tmp, &used);
    } catch (const std::exception&) {
        throw ParseError("not a number: '" + tmp + "'", line_no);
    }
    if (used != tmp.size() || !std::isfinite(v))
        throw ParseError("not a finite number: '" + tmp + "'", line_no);
    return v;
}

} // namespace detail

inline RatingsTable read_ratings(std::istream& in, const OrdinalScale& scale) {
    static constexpr std::string_view header[] = {"instance", "annotator", "rating"};
    RatingsTableBuilder builder(scale.levels());
    detail::read_tsv(in, header, [&](const auto& f, std::size_t line_no) {
        const int level = detail::parse_int(f[2], line_no);
        try {
            builder.add(std::string(f[0]), std::string(f[1]), level);
        } catch (const InvalidLevel& e) {
            throw InvalidLevel("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DuplicateRating& e) {
            throw DuplicateRating("line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    return std::move(builder).build();
}

inline RatingsTable load_ratings(const std::filesystem::path& path, const OrdinalScale& scale) {
    auto in = detail::open_input(path);
    return read_ratings(in, scale);
}

inline void write_ratings(std::ostream& out, const RatingsTable& table) {
    out << "instance\tannotator\trating\n";
    for (const Rating& r : table.entries())
        out << table.instance_id(r.instance) << '\t' << table.annotator_id(r.annotator) << '\t'
            << r.level << '\n';
}

inline void write_ratings(const std::filesystem::path& path, const RatingsTable& table) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_ratings(out, table);
}

/// Reads `instance<TAB>category`. Every instance of the table must be mapped;
/// rows naming instances absent from the table are ignored.
inline CategoryMap read_category_map(std::istream& in, const RatingsTable& table) {
    static constexpr std::string_view header[] = {"instance", "category"};
    constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> cat(table.instances(), unset);
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> index;
    detail::read_tsv(in, header, [&](const auto& f, std::size_t) {
        auto m = table.find_instance(f[0]);
        if (!m) return;
        auto [it, inserted] = index.emplace(std::string(f[1]), ids.size());
        if (inserted) ids.emplace_back(f[1]);
        cat[*m] = it->second;
    });
    for (std::size_t m = 0; m < cat.size(); ++m)
        if (cat[m] == unset)
            throw IncompleteCategoryMap("no category for instance '" + table.instance_id(m) + "'");
    return CategoryMap(table, std::move(cat), std::move(ids));
}

inline CategoryMap build_category_map(const RatingsTable& table, const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_category_map(in, table);
}

inline void write_category_map(std::ostream& out, const RatingsTable& table, const CategoryMap& cats) {
    out << "instance\tcategory\n";
    for (std::size_t m = 0; m < table.instances(); ++m)
        out << table.instance_id(m) << '\t' << cats.category_id(cats.category_of(m)) << '\n';
}

/// Reads `instance<TAB>value`; partial coverage is allowed.
inline GroundTruth read_truth(std::istream& in, const RatingsTable& table) {
    static constexpr std::string_view header[] = {"instance", "value"};
    GroundTruth truth;
    truth.z.assign(table.instances(), 0.0);
    truth.covered.assign(table.instances(), false);
    detail::read_tsv(in, header, [&](const auto& f, std::size_t line_no) {
        auto m = table.find_instance(f[0]);
        if (!m)
            throw UnknownInstance("line " + std::to_string(line_no) + ": unknown instance '" +
                                  std::string(f[0]) + "'");
        truth.z[*m] = detail::parse_double(f[1], line_no);
        truth.covered[*m] = true;
    });
    return truth;
}

inline GroundTruth load_truth(const std::filesystem::path& path, const RatingsTable& table) {
    auto in = detail::open_input(path);
    return read_truth(in, table);
}

inline void write_truth(std::ostream& out, const RatingsTable& table, const GroundTruth& truth) {
    out << "instance\tvalue\n" << std::setprecision(17);
    for (std::size_t m = 0; m < table.instances(); ++m)
        if (truth.covered[m]) out << table.instance_id(m) << '\t' << truth.z[m] << '\n';
}

} // namespace ordcrowd

#endif // ORDCROWD_DATASET_HPP
