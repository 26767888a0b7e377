#pragma once

#include "tangentkit/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tk::harness::io {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_double(double x);

/// Rows are buffered and written in one go. Non-finite values are rejected on entry.
class CsvTable {
public:
    CsvTable(std::string name, std::vector<std::string> header);

    void add(const std::vector<double>& row);
    // Leading text cells followed by numeric cells.
    void add(const std::vector<std::string>& text, const std::vector<double>& row);

    const std::string& name() const { return name_; }
    std::size_t columns() const { return header_.size(); }
    std::string render() const;

private:
    void push(std::vector<std::string> cells);

    std::string name_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// One run directory: marker on open, CSVs as they come, manifest on finish.
class RunDirectory {
public:
    explicit RunDirectory(std::filesystem::path dir);

    void write(const CsvTable& table);
    nlohmann::ordered_json& info() { return info_; }
    // Removes the marker, then writes manifest.json with checksums of every written file.
    void finish(const nlohmann::ordered_json& config_echo, double seconds);

    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
    nlohmann::ordered_json info_ = nlohmann::ordered_json::object();
};

}  // namespace tk::harness::io
