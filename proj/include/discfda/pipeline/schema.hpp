/**
 * @file schema.hpp
 * @brief Submission wire format (JSON) and temperament assignment
 */

#pragma once

#include <json.hpp>

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "../decimal.hpp"
#include "../discount_core.hpp"
#include "../error.hpp"

namespace discfda::pipeline {

using nlohmann::json;

inline constexpr std::string_view kSchemaVersion = "1.0";

/// Fixed order used to break ties between temperament tallies.
inline constexpr std::array<std::string_view, 4> kTemperaments{"Artisan", "Guardian", "Idealist", "Rational"};

inline constexpr std::string_view kUnassigned = "Unassigned";

struct Temperament {
    std::string label;
    bool tie = false;
};

/// Argmax of the tallies; ties go to the earliest label in kTemperaments
/// (then alphabetical for other labels) and are flagged.
inline Temperament primary_temperament(const std::map<std::string, int>& tallies) {
    if (tallies.empty()) return {std::string(kUnassigned), false};
    auto rank = [](const std::string& label) {
        for (std::size_t i = 0; i < kTemperaments.size(); ++i)
            if (kTemperaments[i] == label) return static_cast<int>(i);
        return static_cast<int>(kTemperaments.size());
    };
    const std::string* best = nullptr;
    int best_score = 0;
    bool tie = false;
    for (const auto& [label, score] : tallies) {
        if (!best || score > best_score) {
            best = &label;
            best_score = score;
            tie = false;
        } else if (score == best_score) {
            tie = true;
            int r1 = rank(label), r0 = rank(*best);
            if (r1 < r0 || (r1 == r0 && label < *best)) best = &label;
        }
    }
    return {*best, tie};
}

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::ParseError, where + ": " + what);
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_fail(where, std::string("missing field '") + key + "'");
    return *it;
}

inline double number(const json& v, const std::string& where) {
    if (!v.is_number()) schema_fail(where, "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) schema_fail(where, "non-finite number");
    return d;
}

inline int integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) schema_fail(where, "expected an integer");
    return v.get<int>();
}

inline Decimal amount(const json& v, const std::string& where) {
    if (v.is_string()) return Decimal::parse(v.get<std::string>());
    if (v.is_number_integer()) return Decimal::from_integer(v.get<std::int64_t>());
    if (v.is_number_float()) return Decimal::from_double(v.get<double>());
    schema_fail(where, "expected a decimal string");
}

}  // namespace detail

/// Parses one submission object. ParseError names the offending field;
/// SchemaVersionUnsupported for other versions.
inline RespondentSubmission submission_from_json(const json& j) {
    using detail::require;
    if (!j.is_object()) detail::schema_fail("submission", "expected a JSON object");
    const auto& version = require(j, "schema_version", "submission");
    if (!version.is_string()) detail::schema_fail("schema_version", "expected a string");
    if (version.get<std::string>() != kSchemaVersion)
        throw Error(ErrorCode::SchemaVersionUnsupported, "schema_version '" + version.get<std::string>() + "'");

    RespondentSubmission s;
    const auto& id = require(j, "respondent_id", "submission");
    if (!id.is_string() || id.get<std::string>().empty()) detail::schema_fail("respondent_id", "expected a non-empty string");
    s.respondent_id = id.get<std::string>();
    if (auto it = j.find("gender"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) detail::schema_fail("gender", "expected a string");
        s.gender = it->get<std::string>();
    }
    if (auto it = j.find("age"); it != j.end() && !it->is_null()) s.age = detail::integer(*it, "age");

    const auto& part1 = require(j, "part1", "submission");
    if (!part1.is_array()) detail::schema_fail("part1", "expected an array");
    for (std::size_t i = 0; i < part1.size(); ++i) {
        std::string where = "part1[" + std::to_string(i) + "]";
        const auto& a = part1[i];
        if (!a.is_object()) detail::schema_fail(where, "expected an object");
        Part1Answer ans;
        ans.horizon = detail::integer(require(a, "t", where), where + ".t");
        ans.amount = detail::amount(require(a, "amount", where), where + ".amount");
        if (auto it = a.find("expiry_count"); it != a.end()) ans.expiry_count = detail::integer(*it, where + ".expiry_count");
        s.part1_answers.push_back(ans);
    }
    if (auto it = j.find("part2"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) detail::schema_fail("part2", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            std::string where = "part2[" + std::to_string(i) + "]";
            const auto& a = (*it)[i];
            if (!a.is_object()) detail::schema_fail(where, "expected an object");
            AnomalyResponse r;
            const auto& sc = require(a, "scenario", where);
            auto parsed = sc.is_string() ? parse_scenario(sc.get<std::string>()) : std::nullopt;
            if (!parsed) detail::schema_fail(where + ".scenario", "expected one of delay|magnitude|interval|sign");
            r.scenario = *parsed;
            r.s = detail::number(require(a, "s", where), where + ".s");
            r.t = detail::number(require(a, "t", where), where + ".t");
            r.sigma = detail::number(require(a, "sigma", where), where + ".sigma");
            r.tau = detail::number(require(a, "tau", where), where + ".tau");
            r.base_amount = detail::amount(require(a, "base_amount", where), where + ".base_amount");
            if (!(r.s < r.t)) detail::schema_fail(where, "requires s < t");
            if (!(r.sigma > 0)) detail::schema_fail(where + ".sigma", "must be > 0");
            if (!(r.tau > 0)) detail::schema_fail(where + ".tau", "must be > 0");
            s.part2_answers.push_back(r);
        }
    }
    if (auto it = j.find("part3"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) detail::schema_fail("part3", "expected an object of label -> score");
        for (const auto& [label, score] : it->items()) s.part3_tallies[label] = detail::integer(score, "part3." + label);
    }
    if (auto it = j.find("distractors"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) detail::schema_fail("distractors", "expected an array");
        for (const auto& d : *it) s.distractor_answers.push_back(d.is_string() ? d.get<std::string>() : d.dump());
    }
    if (auto it = j.find("expiry_total"); it != j.end()) s.expiry_total = detail::integer(*it, "expiry_total");
    if (auto it = j.find("invalidated"); it != j.end()) {
        if (!it->is_boolean()) detail::schema_fail("invalidated", "expected a boolean");
        s.invalidated = it->get<bool>();
    }
    return s;
}

inline json submission_to_json(const RespondentSubmission& s) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["respondent_id"] = s.respondent_id;
    j["gender"] = s.gender;
    j["age"] = s.age;
    json part1 = json::array();
    for (const auto& a : s.part1_answers) {
        json x;
        x["t"] = static_cast<int>(a.horizon);
        x["amount"] = a.amount.to_string();
        x["expiry_count"] = a.expiry_count;
        part1.push_back(x);
    }
    j["part1"] = part1;
    json part2 = json::array();
    for (const auto& r : s.part2_answers) {
        json x;
        x["scenario"] = scenario_name(r.scenario);
        x["s"] = r.s;
        x["t"] = r.t;
        x["sigma"] = r.sigma;
        x["tau"] = r.tau;
        x["base_amount"] = r.base_amount.to_string();
        part2.push_back(x);
    }
    j["part2"] = part2;
    j["part3"] = json::object();
    for (const auto& [label, score] : s.part3_tallies) j["part3"][label] = score;
    j["distractors"] = s.distractor_answers;
    j["expiry_total"] = s.expiry_total;
    j["invalidated"] = s.invalidated;
    return j;
}

}  // namespace discfda::pipeline
