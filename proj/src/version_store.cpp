#include "dpcc/version_store.hpp"

#include "dpcc/error.hpp"
#include "dpcc/hash.hpp"
#include "dpcc/json.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace dpcc {

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& p, std::string_view content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + p.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + p.string());
}

void append_line(const fs::path& p, const std::string& line) {
    std::ofstream out(p, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::io_error, "cannot append to " + p.string());
    out << line << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + p.string());
}

std::string safe_component(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
        out += ok ? c : '_';
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

Commit header_from_json(const nlohmann::json& j) {
    Commit c;
    j.at("commit_id").get_to(c.commit_id);
    if (!j.at("parent_id").is_null()) c.parent_id = j.at("parent_id").get<std::string>();
    j.at("author").get_to(c.author);
    j.at("timestamp_ms").get_to(c.timestamp_ms);
    j.at("message").get_to(c.message);
    for (const auto& p : j.at("payloads")) c.payloads.push_back({p.at("name").get<std::string>(), p.at("digest").get<std::string>(), {}});
    return c;
}

const std::vector<std::string>& layout_dirs() {
    static const std::vector<std::string> dirs = {"questions", "sql", "views", "topics"};
    return dirs;
}

void prepare_tree(const fs::path& dir) {
    if (fs::exists(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().filename() == ".git") continue;
            fs::remove_all(entry.path());
        }
    }
    for (const auto& d : layout_dirs()) fs::create_directories(dir / d);
}

}  // namespace

std::string compute_commit_id(const Commit& c) {
    nlohmann::json payloads = nlohmann::json::array();
    for (const auto& p : c.payloads) payloads.push_back({p.name, p.digest});
    const nlohmann::json header = {c.parent_id ? nlohmann::json(*c.parent_id) : nlohmann::json(nullptr), c.author,
                                   c.timestamp_ms, c.message, payloads};
    return sha256_hex(header.dump());
}

void to_json(nlohmann::json& j, const Commit& c) {
    nlohmann::json payloads = nlohmann::json::array();
    for (const auto& p : c.payloads) payloads.push_back({{"name", p.name}, {"digest", p.digest}});
    j = {{"commit_id", c.commit_id},
         {"parent_id", c.parent_id ? nlohmann::json(*c.parent_id) : nlohmann::json(nullptr)},
         {"author", c.author},
         {"timestamp_ms", c.timestamp_ms},
         {"message", c.message},
         {"payloads", payloads}};
}

std::vector<Artifact> artifacts_for(std::span<const StateEvent> events, const DataProductState& after) {
    std::map<std::string, std::string> files;
    for (const auto& e : events) {
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, Question>) {
                    std::ostringstream os;
                    os << p.text << "\n\norigin: " << to_string(p.origin) << '\n';
                    if (p.parent_question) os << "parent: " << *p.parent_question << '\n';
                    for (const auto& t : p.schema_targets) os << "target: " << t.table << (t.column ? "." + *t.column : "") << '\n';
                    files["questions/" + safe_component(p.question_id) + ".txt"] = os.str();
                } else if constexpr (std::is_same_v<T, QueryVersion>) {
                    files["sql/" + safe_component(p.question_id) + "/v" + std::to_string(p.version_no) + ".sql"] =
                        p.sql_text + "\n";
                } else if constexpr (std::is_same_v<T, ViewDef>) {
                    files["views/" + safe_component(p.name) + ".sql"] =
                        "CREATE VIEW " + p.name + " AS " + p.sql_text + ";\n";
                } else if constexpr (std::is_same_v<T, TopicAssignment>) {
                    std::string listing;
                    for (const auto& [id, rec] : after.questions())
                        if (rec->topic) listing += id + "\t" + *rec->topic + "\n";
                    files["topics/assignments.txt"] = listing;
                } else if constexpr (std::is_same_v<T, Contract>) {
                    files["contract.json"] = nlohmann::json(p).dump(2) + "\n";
                }
            },
            e.payload);
    }
    std::vector<Artifact> out;
    for (auto& [name, content] : files) out.push_back({name, std::move(content)});
    return out;
}

VersionStore::VersionStore(fs::path directory, Clock clock) : dir_(std::move(directory)), clock_(std::move(clock)) {
    if (!clock_) {
        clock_ = [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    }
    std::error_code ec;
    fs::create_directories(dir_ / "objects", ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create store at " + dir_.string() + ": " + ec.message());
    load();
}

void VersionStore::load() {
    commits_.clear();
    const auto path = dir_ / "commits.jsonl";
    if (!fs::exists(path)) return;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            commits_.push_back(header_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::chain_corrupt, std::string("unreadable commit log: ") + e.what());
        }
    }
}

std::string VersionStore::commit(const std::vector<Artifact>& artifacts, const std::string& author,
                                 const std::string& message) {
    if (artifacts.empty()) throw Error(ErrorCode::empty_artifacts, "a commit needs at least one artifact");
    std::set<std::string> names;
    for (const auto& a : artifacts) {
        if (a.name.empty()) throw Error(ErrorCode::validation, "artifact names must not be empty");
        if (!names.insert(a.name).second) throw Error(ErrorCode::validation, "duplicate artifact name: " + a.name);
    }

    std::lock_guard lock(mu_);
    Commit c;
    if (!commits_.empty()) c.parent_id = commits_.back().commit_id;
    c.author = author;
    c.timestamp_ms = clock_();
    c.message = message;
    for (const auto& a : artifacts) {
        Payload p{a.name, sha256_hex(a.content), a.content};
        const auto object = dir_ / "objects" / p.digest;
        if (!fs::exists(object)) write_file(object, p.content);
        c.payloads.push_back(std::move(p));
    }
    c.commit_id = compute_commit_id(c);
    append_line(dir_ / "commits.jsonl", nlohmann::json(c).dump());
    commits_.push_back(c);
    return c.commit_id;
}

bool VersionStore::verify_chain() const {
    std::lock_guard lock(mu_);
    const auto path = dir_ / "commits.jsonl";
    if (!fs::exists(path)) return true;
    try {
        std::istringstream in(read_file(path));
        std::string line;
        std::optional<std::string> prev;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto c = header_from_json(nlohmann::json::parse(line));
            if (c.parent_id != prev) return false;
            if (compute_commit_id(c) != c.commit_id) return false;
            std::set<std::string> names;
            for (const auto& p : c.payloads) {
                if (!names.insert(p.name).second) return false;
                const auto object = dir_ / "objects" / p.digest;
                if (!fs::exists(object) || sha256_hex(read_file(object)) != p.digest) return false;
            }
            prev = c.commit_id;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<Commit> VersionStore::commits() const {
    std::lock_guard lock(mu_);
    return commits_;
}

std::optional<std::string> VersionStore::head() const {
    std::lock_guard lock(mu_);
    if (commits_.empty()) return std::nullopt;
    return commits_.back().commit_id;
}

std::size_t VersionStore::size() const {
    std::lock_guard lock(mu_);
    return commits_.size();
}

void VersionStore::export_worktree(const fs::path& directory) const {
    std::map<std::string, std::string> tree;  // name -> digest
    for (const auto& c : commits())
        for (const auto& p : c.payloads) tree[p.name] = p.digest;
    prepare_tree(directory);
    for (const auto& [name, digest] : tree) write_file(directory / name, read_file(dir_ / "objects" / digest));
}

void VersionStore::replay_export(const fs::path& directory) const {
    prepare_tree(directory);
    for (const auto& c : commits())
        for (const auto& p : c.payloads) write_file(directory / p.name, read_file(dir_ / "objects" / p.digest));
}

void VersionStore::append_journal(const nlohmann::json& record) {
    std::lock_guard lock(mu_);
    append_line(dir_ / "journal.jsonl", record.dump());
}

std::vector<nlohmann::json> VersionStore::journal() const {
    std::lock_guard lock(mu_);
    std::vector<nlohmann::json> out;
    const auto path = dir_ / "journal.jsonl";
    if (!fs::exists(path)) return out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

bool trees_equal(const fs::path& a, const fs::path& b) {
    auto listing = [](const fs::path& root) {
        std::map<std::string, std::string> files;
        std::set<std::string> dirs;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            const auto rel = fs::relative(e.path(), root).generic_string();
            if (e.is_directory()) dirs.insert(rel);
            else files[rel] = read_file(e.path());
        }
        return std::make_pair(files, dirs);
    };
    return listing(a) == listing(b);
}

}  // namespace dpcc
