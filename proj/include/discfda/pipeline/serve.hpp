/**
 * @file serve.hpp
 * @brief HTTP ingestion endpoint backed by an append-only JSON Lines store
 */

#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <httplib.h>
// <resolv.h> (via httplib) defines _res, which Eigen uses as a parameter name.
#ifdef _res
#undef _res
#endif

#include <cerrno>
#include <cstring>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include "ingest.hpp"
#include "schema.hpp"

namespace discfda::pipeline {

/// Single-writer JSON Lines store. Each record is one write(2) on an
/// O_APPEND descriptor; a short write is rolled back with ftruncate so the
/// file never holds half a record.
class SubmissionStore {
public:
    explicit SubmissionStore(std::string path) : path_(std::move(path)) {
        fd_ = ::open(path_.c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::StoreWriteFailure, "cannot open " + path_ + ": " + std::strerror(errno));
        struct stat st {};
        if (::fstat(fd_, &st) == 0 && S_ISREG(st.st_mode)) recover();
    }

    SubmissionStore(const SubmissionStore&) = delete;
    SubmissionStore& operator=(const SubmissionStore&) = delete;

    ~SubmissionStore() {
        if (fd_ >= 0) ::close(fd_);
    }

    bool contains(const std::string& id) const {
        std::lock_guard lock(mu_);
        return ids_.count(id) > 0;
    }

    /// Appends one record. Returns false if the id is already stored.
    bool append(const std::string& id, const std::string& line) {
        std::lock_guard lock(mu_);
        if (ids_.count(id)) return false;
        std::string rec = line + "\n";
        off_t before = ::lseek(fd_, 0, SEEK_END);
        ssize_t n = ::write(fd_, rec.data(), rec.size());
        if (n != static_cast<ssize_t>(rec.size())) {
            int err = n < 0 ? errno : ENOSPC;
            if (n > 0 && before >= 0 && ::ftruncate(fd_, before) != 0) err = errno;
            throw Error(ErrorCode::StoreWriteFailure, "append to " + path_ + " failed: " + std::strerror(err));
        }
        ids_.insert(id);
        ++lines_;
        return true;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return lines_;
    }

    const std::string& path() const { return path_; }
    const std::vector<QuarantinedLine>& quarantined() const { return quarantined_; }

private:
    /// Loads stored ids; a torn final line (no newline) is moved to
    /// <path>.quarantine and cut from the store.
    void recover() {
        std::string content = read_file(path_);
        auto lines = detail::split_lines(content);
        std::size_t keep = content.size();
        for (const auto& l : lines) {
            if (!l.terminated) {
                keep = content.size() - l.text.size();
                quarantined_.push_back({l.number, std::string(l.text), "torn final line"});
                continue;
            }
            if (detail::trim(l.text).empty()) continue;
            ++lines_;
            try {
                auto j = json::parse(l.text);
                if (j.is_object() && j.contains("respondent_id") && j["respondent_id"].is_string()) ids_.insert(j["respondent_id"].get<std::string>());
            } catch (const json::exception&) {
            }
        }
        if (!quarantined_.empty()) {
            std::string q;
            for (const auto& l : quarantined_) q += l.content + "\n";
            std::ofstream(path_ + ".quarantine", std::ios::binary | std::ios::app) << q;
            if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0)
                throw Error(ErrorCode::StoreWriteFailure, "cannot truncate torn tail of " + path_);
        }
    }

    std::string path_;
    int fd_ = -1;
    mutable std::mutex mu_;
    std::set<std::string> ids_;
    std::size_t lines_ = 0;
    std::vector<QuarantinedLine> quarantined_;
};

struct SubmissionResponse {
    int status = 0;
    json body;
};

/// Request handling without the transport, so it can be tested directly.
/// Schema errors, missing answers and non-positive amounts are rejected
/// with 422. Records that parse but will be excluded at analysis time
/// (discount above one, invalidated timer) are stored and the exclusion
/// reasons are returned alongside 201.
inline SubmissionResponse handle_submission(SubmissionStore& store, const std::string& body, const TimeGrid& grid = TimeGrid{}) {
    auto reject = [](int status, json errors) { return SubmissionResponse{status, json{{"errors", std::move(errors)}}}; };
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        return reject(422, json::array({{{"code", "ParseError"}, {"detail", e.what()}}}));
    }
    RespondentSubmission s;
    try {
        s = submission_from_json(j);
    } catch (const Error& e) {
        return reject(422, json::array({{{"code", code_name(e.code())}, {"detail", e.detail()}}}));
    }
    auto outcome = validate_submission(s, grid);
    json errors = json::array(), exclusions = json::array();
    for (const auto& v : outcome.violations) {
        json item{{"code", code_name(v.code)}, {"detail", v.detail}};
        bool fatal = v.code == ErrorCode::MissingAnswer || v.code == ErrorCode::NonPositiveAmount;
        (fatal ? errors : exclusions).push_back(item);
    }
    if (!errors.empty()) return reject(422, errors);
    if (store.contains(s.respondent_id))
        return reject(409, json::array({{{"code", "DuplicateRespondent"}, {"detail", "respondent_id '" + s.respondent_id + "' already stored"}}}));
    try {
        if (!store.append(s.respondent_id, submission_to_json(s).dump()))
            return reject(409, json::array({{{"code", "DuplicateRespondent"}, {"detail", "respondent_id '" + s.respondent_id + "' already stored"}}}));
    } catch (const Error& e) {
        return reject(503, json::array({{{"code", code_name(e.code())}, {"detail", e.detail()}}}));
    }
    json ok{{"respondent_id", s.respondent_id}};
    if (!exclusions.empty()) ok["exclusions"] = exclusions;
    return {201, ok};
}

/// POST /api/v1/submissions and GET /api/v1/health.
class IngestionServer {
public:
    IngestionServer(std::string store_path, TimeGrid grid = TimeGrid{}) : store_(std::move(store_path)), grid_(std::move(grid)) {
        // No SO_REUSEPORT: a second server on a busy port must fail, not share it.
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        });
        server_.Post("/api/v1/submissions", [this](const httplib::Request& req, httplib::Response& res) {
            auto r = handle_submission(store_, req.body, grid_);
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        });
        server_.Get("/api/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"status", "ok"}, {"schema_version", kSchemaVersion}, {"stored", store_.size()}}.dump(), "application/json");
        });
    }

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port) {
        if (port == 0) {
            port = server_.bind_to_any_port(host);
            if (port < 0) throw Error(ErrorCode::BindFailure, "cannot bind " + host);
        } else if (!server_.bind_to_port(host, port)) {
            throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
        }
        port_ = port;
        return port;
    }

    /// Blocks until stop().
    void listen() { server_.listen_after_bind(); }

    void start_background() {
        thread_ = std::thread([this] { listen(); });
        server_.wait_until_ready();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~IngestionServer() { stop(); }

    int port() const { return port_; }
    SubmissionStore& store() { return store_; }

private:
    SubmissionStore store_;
    TimeGrid grid_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

/// Splits "host:port"; a bare port binds all interfaces.
inline std::pair<std::string, int> parse_address(const std::string& addr) {
    auto colon = addr.rfind(':');
    std::string host = colon == std::string::npos ? "0.0.0.0" : addr.substr(0, colon);
    std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
    try {
        std::size_t used = 0;
        int p = std::stoi(port, &used);
        if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range(port);
        return {host.empty() ? "0.0.0.0" : host, p};
    } catch (const std::exception&) {
        throw Error(ErrorCode::BindFailure, "bad address '" + addr + "'");
    }
}

}  // namespace discfda::pipeline
