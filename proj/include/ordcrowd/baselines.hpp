#ifndef ORDCROWD_BASELINES_HPP
#define ORDCROWD_BASELINES_HPP

// Per-instance mean, median and majority vote over the scale values.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"

namespace ordcrowd::baselines {

namespace detail {

inline std::vector<double> values_of(const RatingsTable& table, const OrdinalScale& scale, std::size_t m) {
    const auto rated = table.by_instance(m);
    if (rated.empty()) throw NoRatings("instance '" + table.instance_id(m) + "' has no ratings");
    std::vector<double> v;
    v.reserve(rated.size());
    for (std::size_t e : rated) v.push_back(scale.value(table.entry(e).level));
    return v;
}

} // namespace detail

inline std::vector<double> mean_agg(const RatingsTable& table, const OrdinalScale& scale) {
    std::vector<double> z(table.instances());
    for (std::size_t m = 0; m < z.size(); ++m) {
        const auto v = detail::values_of(table, scale, m);
        double s = 0.0;
        for (double x : v) s += x;
        z[m] = s / static_cast<double>(v.size());
    }
    return z;
}

/// Even counts average the two middle values.
inline std::vector<double> median_agg(const RatingsTable& table, const OrdinalScale& scale) {
    std::vector<double> z(table.instances());
    for (std::size_t m = 0; m < z.size(); ++m) {
        auto v = detail::values_of(table, scale, m);
        std::sort(v.begin(), v.end());
        const std::size_t h = v.size() / 2;
        z[m] = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    }
    return z;
}

/// Modal value; ties average all tied modes.
inline std::vector<double> majority_vote(const RatingsTable& table, const OrdinalScale& scale) {
    std::vector<double> z(table.instances());
    std::vector<std::size_t> counts(static_cast<std::size_t>(scale.levels()));
    for (std::size_t m = 0; m < z.size(); ++m) {
        const auto rated = table.by_instance(m);
        if (rated.empty()) throw NoRatings("instance '" + table.instance_id(m) + "' has no ratings");
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t e : rated) ++counts[static_cast<std::size_t>(table.entry(e).level - 1)];
        const std::size_t top = *std::max_element(counts.begin(), counts.end());
        double s = 0.0;
        std::size_t ties = 0;
        for (std::size_t k = 0; k < counts.size(); ++k)
            if (counts[k] == top) {
                s += scale.value(static_cast<int>(k) + 1);
                ++ties;
            }
        z[m] = s / static_cast<double>(ties);
    }
    return z;
}

} // namespace ordcrowd::baselines

#endif // ORDCROWD_BASELINES_HPP
