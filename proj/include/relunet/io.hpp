#pragma once

#include "relunet/piecewise.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace relunet {

using Json = nlohmann::json;

// Numbers and "p/q" strings are accepted; numbers are read from their shortest decimal text.
template <class S>
S scalar_from_json(const Json& j) {
    if (j.is_string()) return parse_scalar<S>(j.get<std::string>());
    if (j.is_number()) {
        if constexpr (is_exact_v<S>)
            return parse_scalar<Rational>(j.dump());
        else
            return j.get<double>();
    }
    throw InvalidInput("expected a number or a rational string, got " + j.dump());
}

template <class S>
Json scalar_to_json(const S& x) {
    if constexpr (is_exact_v<S>)
        return Json(format_scalar(x));
    else
        return Json(x);
}

template <class S>
std::vector<S> scalars_from_json(const Json& j) {
    if (!j.is_array()) throw InvalidInput("expected an array, got " + j.dump());
    std::vector<S> out;
    for (const auto& e : j) out.push_back(scalar_from_json<S>(e));
    return out;
}

template <class S>
Json scalars_to_json(const std::vector<S>& xs) {
    Json out = Json::array();
    for (const auto& x : xs) out.push_back(scalar_to_json(x));
    return out;
}

template <class S>
std::pair<S, S> domain_from_json(const Json& j) {
    auto d = scalars_from_json<S>(j);
    if (d.size() != 2 || !(d[0] < d[1])) throw InvalidInput("domain must be [a, b] with a < b");
    return {d[0], d[1]};
}

// {domain:[a,b], breakpoints:[...], pieces:[[c0,c1,...],...]}; breakpoints default to the domain.
template <class S>
PiecewisePoly<S> pp_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidInput("piecewise polynomial must be a JSON object");
    if (!j.contains("pieces")) throw InvalidInput("piecewise polynomial lacks 'pieces'");
    std::vector<S> xs;
    if (j.contains("breakpoints")) xs = scalars_from_json<S>(j.at("breakpoints"));
    if (j.contains("domain")) {
        auto [a, b] = domain_from_json<S>(j.at("domain"));
        if (xs.empty()) xs = {a, b};
        if (xs.front() != a || xs.back() != b) throw InvalidInput("breakpoints must start and end at the domain");
    }
    if (xs.empty()) throw InvalidInput("piecewise polynomial lacks a domain");
    std::vector<Poly<S>> ps;
    for (const auto& piece : j.at("pieces")) ps.emplace_back(scalars_from_json<S>(piece));
    return PiecewisePoly<S>(std::move(xs), std::move(ps));
}

template <class S>
Json pp_to_json(const PiecewisePoly<S>& f) {
    Json out;
    out["domain"] = scalars_to_json(std::vector<S>{f.lower(), f.upper()});
    out["breakpoints"] = scalars_to_json(f.breakpoints());
    Json pieces = Json::array();
    for (const auto& p : f.pieces()) pieces.push_back(scalars_to_json(p.coeffs()));
    out["pieces"] = pieces;
    return out;
}

}  // namespace relunet
