/**
 * @file ingest.hpp
 * @brief Loading questionnaire datasets from JSON Lines or CSV
 */

#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "../discount_core.hpp"
#include "../error.hpp"
#include "csv.hpp"
#include "schema.hpp"

namespace discfda::pipeline {

/// Accepted submissions sharing one time grid.
struct Dataset {
    std::vector<RespondentSubmission> submissions;
    TimeGrid grid;
    std::string schema_version{kSchemaVersion};

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Exclusion {
    std::string respondent_id;
    std::size_t line = 0;
    std::vector<RuleViolation> violations;
};

struct QuarantinedLine {
    std::size_t line = 0;
    std::string content;
    std::string reason;
};

struct IngestReport {
    Dataset dataset;
    std::vector<Exclusion> excluded;
    std::vector<QuarantinedLine> quarantined;
    std::size_t records = 0;

    std::size_t accepted() const { return dataset.submissions.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

struct Line {
    std::size_t number;
    std::string_view text;
    bool terminated;
};

inline std::vector<Line> split_lines(std::string_view content) {
    std::vector<Line> lines;
    std::size_t start = 0, number = 1;
    while (start < content.size()) {
        auto nl = content.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back({number, content.substr(start), false});
            break;
        }
        lines.push_back({number, content.substr(start, nl - start), true});
        start = nl + 1;
        ++number;
    }
    return lines;
}

inline Error at_line(std::size_t line, const Error& e) { return Error(e.code(), "line " + std::to_string(line) + ": " + e.detail()); }

class Collector {
public:
    explicit Collector(TimeGrid grid) { report_.dataset.grid = std::move(grid); }

    void add(RespondentSubmission s, std::size_t line) {
        if (!ids_.insert(s.respondent_id).second)
            throw Error(ErrorCode::DuplicateRespondent, "line " + std::to_string(line) + ": respondent_id '" + s.respondent_id + "' appears twice");
        ++report_.records;
        auto outcome = validate_submission(s, report_.dataset.grid);
        if (outcome.accepted)
            report_.dataset.submissions.push_back(std::move(s));
        else
            report_.excluded.push_back({s.respondent_id, line, std::move(outcome.violations)});
    }

    IngestReport& report() { return report_; }

private:
    IngestReport report_;
    std::set<std::string> ids_;
};

}  // namespace detail

/// JSON Lines: one submission object per line. A final line without a
/// terminating newline that does not parse is a torn append; it is
/// quarantined rather than reported as a ParseError.
inline IngestReport ingest_jsonl(std::string_view content, const TimeGrid& grid = TimeGrid{}) {
    detail::Collector collector(grid);
    auto lines = detail::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        auto text = detail::trim(line.text);
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            if (i + 1 == lines.size() && !line.terminated) {
                collector.report().quarantined.push_back({line.number, std::string(line.text), "torn final line"});
                continue;
            }
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line.number) + ": " + e.what());
        }
        RespondentSubmission s;
        try {
            s = submission_from_json(j);
        } catch (const Error& e) {
            throw detail::at_line(line.number, e);
        }
        collector.add(std::move(s), line.number);
    }
    return std::move(collector.report());
}

/// CSV layout: id,gender,age,amount_<t0>,amount_<t1>,... one row per
/// respondent. Horizons come from the header.
inline IngestReport ingest_csv(std::string_view content) {
    auto lines = detail::split_lines(content);
    std::size_t first = 0;
    while (first < lines.size() && detail::trim(lines[first].text).empty()) ++first;
    if (first == lines.size()) return IngestReport{};
    auto header = split_csv_line(detail::trim(lines[first].text));
    if (header.size() < 4 || header[0] != "id" || header[1] != "gender" || header[2] != "age")
        throw Error(ErrorCode::ParseError, "line " + std::to_string(lines[first].number) + ": header must start with id,gender,age");
    std::vector<double> horizons;
    for (std::size_t c = 3; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h.rfind("amount_", 0) != 0) throw Error(ErrorCode::ParseError, "header column '" + h + "' is not amount_<days>");
        try {
            std::size_t used = 0;
            int t = std::stoi(h.substr(7), &used);
            if (used != h.size() - 7) throw std::invalid_argument(h);
            horizons.push_back(t);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "header column '" + h + "' has no integer horizon");
        }
    }
    TimeGrid grid;
    try {
        grid = TimeGrid(horizons);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, "header horizons: " + e.detail());
    }
    detail::Collector collector(grid);
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        const auto& line = lines[i];
        auto text = detail::trim(line.text);
        if (text.empty()) continue;
        auto cells = split_csv_line(text);
        if (cells.size() != header.size()) {
            if (i + 1 == lines.size() && !line.terminated) {
                collector.report().quarantined.push_back({line.number, std::string(line.text), "torn final line"});
                continue;
            }
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line.number) + ": expected " + std::to_string(header.size()) +
                                                   " fields, got " + std::to_string(cells.size()));
        }
        RespondentSubmission s;
        try {
            if (cells[0].empty()) throw Error(ErrorCode::ParseError, "empty id");
            s.respondent_id = cells[0];
            s.gender = cells[1];
            if (!cells[2].empty()) {
                std::size_t used = 0;
                try {
                    s.age = std::stoi(cells[2], &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != cells[2].size()) throw Error(ErrorCode::ParseError, "age '" + cells[2] + "' is not an integer");
            }
            for (std::size_t c = 3; c < cells.size(); ++c) {
                if (cells[c].empty()) continue;  // unanswered
                s.part1_answers.push_back({horizons[c - 3], Decimal::parse(cells[c]), 0});
            }
        } catch (const Error& e) {
            throw detail::at_line(line.number, e);
        }
        collector.add(std::move(s), line.number);
    }
    return std::move(collector.report());
}

inline bool looks_like_csv(std::string_view path) { return path.size() >= 4 && path.substr(path.size() - 4) == ".csv"; }

/// Reads a dataset file; `.csv` selects the CSV layout, anything else JSON Lines.
inline IngestReport ingest(const std::string& path, const TimeGrid& grid = TimeGrid{}) {
    std::string content = read_file(path);
    return looks_like_csv(path) ? ingest_csv(content) : ingest_jsonl(content, grid);
}

inline std::string dataset_to_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& s : ds.submissions) out += submission_to_json(s).dump() + "\n";
    return out;
}

}  // namespace discfda::pipeline
