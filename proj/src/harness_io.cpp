#include "harness_io.hpp"

#include "tangentkit/errors.hpp"
#include "tangentkit/harness.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>

#ifndef TANGENTKIT_VERSION
#define TANGENTKIT_VERSION "unknown"
#endif

namespace tk::harness::io {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::string name, std::vector<std::string> header)
    : name_(std::move(name)), header_(std::move(header)) {}

void CsvTable::push(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) {
        throw DimensionError(name_ + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header_.size()));
    }
    rows_.push_back(std::move(cells));
}

void CsvTable::add(const std::vector<double>& row) { add({}, row); }

void CsvTable::add(const std::vector<std::string>& text, const std::vector<double>& row) {
    std::vector<std::string> cells = text;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (!std::isfinite(row[j])) {
            throw ValidationError(name_ + ": non-finite value in column '" + header_[text.size() + j] + "'");
        }
        cells.push_back(format_double(row[j]));
    }
    push(std::move(cells));
}

std::string CsvTable::render() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t j = 0; j < cells.size(); ++j) out += (j ? "," : "") + cells[j];
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string() + " for checksumming");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

RunDirectory::RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    // A manifest from an earlier run must not vouch for this one.
    std::filesystem::remove(dir_ / "manifest.json");
    std::ofstream(dir_ / kPartialMarker) << "run started; manifest.json appears on completion\n";
}

void RunDirectory::write(const CsvTable& table) {
    std::ofstream out(dir_ / table.name(), std::ios::binary);
    if (!out) throw FormatError("cannot write " + (dir_ / table.name()).string());
    out << table.render();
    if (!out) throw FormatError("write failed for " + (dir_ / table.name()).string());
    files_.push_back(table.name());
}

void RunDirectory::finish(const nlohmann::ordered_json& config_echo, double seconds) {
    nlohmann::ordered_json manifest;
    manifest["config"] = config_echo;
    manifest["library_version"] = TANGENTKIT_VERSION;
    manifest["wall_clock_seconds"] = seconds;
    manifest["info"] = info_;
    nlohmann::ordered_json sums = nlohmann::ordered_json::object();
    for (const auto& f : files_) sums[f] = sha256_file(dir_ / f);
    manifest["files"] = sums;
    std::filesystem::remove(dir_ / kPartialMarker);
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw FormatError("cannot write manifest in " + dir_.string());
}

}  // namespace tk::harness::io
