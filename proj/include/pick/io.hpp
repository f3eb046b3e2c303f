#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pick/errors.hpp"
#include "pick/graphs.hpp"

namespace pick::io {

namespace fs = std::filesystem;

/// I/O failure (missing file, unparsable content).
class IoError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// Shortest decimal that round-trips a double exactly (17 significant digits).
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(item);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::vector<std::string>> read_csv_cells(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split(trim(line), ','));
    }
    return rows;
}

}  // namespace detail

/// Headerless CSV, comma separated, LF line endings.
inline std::string to_csv(const Eigen::MatrixXd& m) {
    std::string out;
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += format_real(m(r, c));
        }
        out += '\n';
    }
    return out;
}

inline std::string to_csv(const BinaryMatrix& m) {
    std::string out;
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += std::to_string(m(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) { write_text(path, to_csv(m)); }
inline void write_binary(const fs::path& path, const BinaryMatrix& m) { write_text(path, to_csv(m)); }

inline Eigen::MatrixXd read_matrix(const fs::path& path) {
    const auto rows = detail::read_csv_cells(path);
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size())
            throw IoError(path.string() + ":" + std::to_string(r + 1) + ": ragged row");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            try {
                std::size_t used = 0;
                const std::string cell = detail::trim(rows[r][c]);
                m(static_cast<Index>(r), static_cast<Index>(c)) = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw IoError(path.string() + ":" + std::to_string(r + 1) + ": bad number '" + rows[r][c] + "'");
            }
        }
    }
    return m;
}

inline BinaryMatrix read_binary(const fs::path& path) {
    const Eigen::MatrixXd m = read_matrix(path);
    if (!(m.array() == 0.0 || m.array() == 1.0).all()) throw IoError(path.string() + ": entries must be 0 or 1");
    return m.cast<int>();
}

/// Adjacency files: row i = source node. Dag already uses that layout.
inline void write_dag(const fs::path& path, const Dag& dag) { write_binary(path, dag.adjacency()); }
inline Dag read_dag(const fs::path& path) { return Dag(read_binary(path)); }

/// Lag matrices are stored transposed (row = lagged source) to keep every
/// adjacency file row-is-source.
inline void write_lag(const fs::path& path, const BinaryMatrix& lag) { write_binary(path, lag.transpose()); }
inline BinaryMatrix read_lag(const fs::path& path) { return read_binary(path).transpose(); }

/// Edge list "i j" per line, 0-indexed, i < j.
inline std::string to_edge_list(const Network& net) {
    std::string out;
    for (auto [i, j] : net.edges()) out += std::to_string(i) + " " + std::to_string(j) + "\n";
    return out;
}

inline Network read_edge_list(const fs::path& path, Index n) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::pair<Index, Index>> edges;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        std::istringstream ls(line);
        long long i = -1, j = -1;
        if (!(ls >> i >> j) || i < 0 || j < 0 || i >= n || j >= n || i == j)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad edge '" + line + "'");
        edges.emplace_back(i, j);
    }
    return Network::from_edges(n, edges);
}

/// Ordered key=value text (one pair per line, '#' starts a comment).
class KeyValues {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static KeyValues parse(const std::string& text, const std::string& source) {
        KeyValues kv;
        kv.source_ = source;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ArgumentError(source + ":" + std::to_string(lineno) + ": expected key=value");
            const std::string key = detail::trim(line.substr(0, eq));
            if (key.empty()) throw ArgumentError(source + ":" + std::to_string(lineno) + ": empty key");
            if (kv.entries_.count(key))
                throw ArgumentError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            kv.entries_[key] = {detail::trim(line.substr(eq + 1)), lineno};
            kv.order_.push_back(key);
        }
        return kv;
    }

    static KeyValues load(const fs::path& path) { return parse(read_text(path), path.string()); }

    [[nodiscard]] const std::string& source() const { return source_; }
    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }
    [[nodiscard]] const std::vector<std::string>& keys() const { return order_; }

    [[nodiscard]] std::string error_at(const std::string& key, const std::string& msg) const {
        const auto it = entries_.find(key);
        const std::string where = it == entries_.end() ? source_ : source_ + ":" + std::to_string(it->second.line);
        return where + ": " + key + ": " + msg;
    }

    [[nodiscard]] std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second.value;
    }

    [[nodiscard]] std::string require(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) throw ArgumentError(source_ + ": missing required key '" + key + "'");
        return it->second.value;
    }

    [[nodiscard]] std::vector<std::string> list(const std::string& key, const std::string& fallback) const {
        std::vector<std::string> out;
        for (const auto& item : detail::split(get(key, fallback), ',')) {
            const auto t = detail::trim(item);
            if (t.empty()) throw ArgumentError(error_at(key, "empty list item"));
            out.push_back(t);
        }
        return out;
    }

    template <class T>
    [[nodiscard]] T number(const std::string& key, T fallback) const {
        if (!has(key)) return fallback;
        return parse_number<T>(key, get(key, ""));
    }

    template <class T>
    [[nodiscard]] std::vector<T> numbers(const std::string& key, const std::string& fallback) const {
        std::vector<T> out;
        for (const auto& item : list(key, fallback)) out.push_back(parse_number<T>(key, item));
        return out;
    }

    void set(const std::string& key, const std::string& value) {
        if (!entries_.count(key)) order_.push_back(key);
        entries_[key] = {value, 0};
    }

    [[nodiscard]] std::string to_string() const {
        std::string out;
        for (const auto& k : order_) out += k + "=" + entries_.at(k).value + "\n";
        return out;
    }

private:
    template <class T>
    T parse_number(const std::string& key, const std::string& text) const {
        try {
            std::size_t used = 0;
            T v{};
            if constexpr (std::is_floating_point_v<T>) v = static_cast<T>(std::stod(text, &used));
            else v = static_cast<T>(std::stoll(text, &used));
            if (used != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            throw ArgumentError(error_at(key, "not a number: '" + text + "'"));
        }
    }

    std::string source_;
    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

}  // namespace pick::io
