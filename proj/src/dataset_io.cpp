#include "tangentkit/datasets.hpp"

#include "tangentkit/errors.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace tk::data {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
    if (offset + 4 > bytes.size()) throw FormatError(path.string() + ": truncated IDX header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_bytes(images);
    const auto lab = read_bytes(labels);

    const std::uint32_t img_magic = read_be32(img, 0, images);
    if (img_magic != 0x00000803u) throw FormatError(images.string() + ": bad IDX image magic");
    const std::uint32_t lab_magic = read_be32(lab, 0, labels);
    if (lab_magic != 0x00000801u) throw FormatError(labels.string() + ": bad IDX label magic");

    const std::size_t n = read_be32(img, 4, images);
    const std::size_t rows = read_be32(img, 8, images);
    const std::size_t cols = read_be32(img, 12, images);
    const std::size_t n_labels = read_be32(lab, 4, labels);
    if (n != n_labels) {
        throw ValidationError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) +
                              " labels");
    }
    const std::size_t pixels = rows * cols;
    if (img.size() < 16 + n * pixels) throw FormatError(images.string() + ": truncated image data");
    if (lab.size() < 8 + n) throw FormatError(labels.string() + ": truncated label data");

    LabeledDataset ds;
    ds.generator = "idx";
    ds.kind = LabelKind::multiclass;
    ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < pixels; ++p) {
            ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = img[16 + i * pixels + p] / 255.0;
        }
        const int l = lab[8 + i];
        ds.labels.push_back(l);
        max_label = std::max(max_label, l);
    }
    ds.classes = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

LabeledDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && schema.header) continue;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::vector<double> values;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            const auto first = cell.find_first_not_of(" \t");
            const auto last = cell.find_last_not_of(" \t");
            cell = first == std::string::npos ? std::string() : cell.substr(first, last - first + 1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
            }
            values.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (values.size() < 2) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": need at least one feature and a label");
        }
        if (width == 0) width = values.size();
        if (values.size() != width) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                              " columns, found " + std::to_string(values.size()));
        }
        const double label = values.back();
        if (label != std::floor(label)) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": label is not an integer");
        }
        labels.push_back(static_cast<int>(label));
        values.pop_back();
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");

    LabeledDataset ds;
    ds.generator = "csv";
    ds.kind = schema.kind;
    ds.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j + 1 < width; ++j) {
            ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    ds.labels = std::move(labels);
    if (schema.kind == LabelKind::binary) {
        ds.classes = 2;
    } else if (schema.classes > 0) {
        ds.classes = schema.classes;
    } else {
        ds.classes = static_cast<std::size_t>(*std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
    }
    ds.validate();
    return ds;
}

}  // namespace tk::data
