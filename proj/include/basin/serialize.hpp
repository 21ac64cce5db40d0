#ifndef BASIN_SERIALIZE_HPP
#define BASIN_SERIALIZE_HPP

#include <string>

#include "json.hpp"

#include "basin/jets.hpp"

namespace basin {

// JSON layout: {d, K, parts:[{k, terms:[{alpha, i, re, im}]}]}.
// Exact coefficients carry re/im as "p/q" strings; float ones as numbers.
// Terms come out in the container order (component, then colex), so exact
// round trips are byte-stable.

inline nlohmann::json coeff_to_json(const RatC& c) {
    return {{"re", rational_to_string(c.re)}, {"im", rational_to_string(c.im)}};
}

inline nlohmann::json coeff_to_json(const std::complex<double>& c) {
    return {{"re", c.real()}, {"im", c.imag()}};
}

inline void coeff_from_json(const nlohmann::json& j, RatC& out) {
    out.re = rational_from_string(j.at("re").get<std::string>());
    out.im = rational_from_string(j.at("im").get<std::string>());
}

inline void coeff_from_json(const nlohmann::json& j, std::complex<double>& out) {
    out = {j.at("re").get<double>(), j.at("im").get<double>()};
}

template <class S>
nlohmann::json to_json(const HomogeneousMap<S>& p) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [key, c] : p.terms()) {
        nlohmann::json t = coeff_to_json(c);
        t["alpha"] = key.alpha;
        t["i"] = key.comp;
        terms.push_back(std::move(t));
    }
    return {{"k", p.degree()}, {"terms", std::move(terms)}};
}

template <class S>
HomogeneousMap<S> homogeneous_from_json(const nlohmann::json& j, int d) {
    HomogeneousMap<S> p(d, j.at("k").get<int>());
    for (const auto& t : j.at("terms")) {
        S c;
        coeff_from_json(t, c);
        p.set(t.at("alpha").get<MultiIndex>(), t.at("i").get<int>(), c);
    }
    return p;
}

template <class S>
nlohmann::json to_json(const Jet<S>& jet) {
    nlohmann::json parts = nlohmann::json::array();
    for (int k = 1; k <= jet.truncation(); ++k) {
        if (jet.part(k).is_zero()) continue;
        parts.push_back(to_json(jet.part(k)));
    }
    return {{"d", jet.dim()}, {"K", jet.truncation()}, {"parts", std::move(parts)}};
}

template <class S>
Jet<S> jet_from_json(const nlohmann::json& j) {
    const int d = j.at("d").get<int>();
    Jet<S> out(d, j.at("K").get<int>());
    for (const auto& pj : j.at("parts")) out.set_part(homogeneous_from_json<S>(pj, d));
    return out;
}

template <class S>
nlohmann::json to_json(const Mat<S>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.size(); ++j) row.push_back(coeff_to_json(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

template <class S>
Mat<S> mat_from_json(const nlohmann::json& j) {
    const int n = int(j.size());
    Mat<S> m(n);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c) coeff_from_json(j.at(std::size_t(i)).at(std::size_t(c)), m(i, c));
    return m;
}

}  // namespace basin

#endif
