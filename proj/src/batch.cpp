// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/batch.hpp"

#include "umst/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace umst {

std::string to_string(Stage stage)
{
    switch (stage) {
    case Stage::data: return "data";
    case Stage::class_guided: return "class_guided";
    case Stage::inverted_noise: return "inverted_noise";
    case Stage::uncertainty_guided: return "uncertainty_guided";
    }
    return "data";
}

Stage stage_from_string(const std::string& name)
{
    if (name == "data") return Stage::data;
    if (name == "class_guided") return Stage::class_guided;
    if (name == "inverted_noise") return Stage::inverted_noise;
    if (name == "uncertainty_guided") return Stage::uncertainty_guided;
    throw IoError("unknown stage tag: " + name);
}

namespace {

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << "idx,label,stage,entropy";
    for (int j = 0; j < batch.dim(); ++j) {
        out << ",x" << j;
    }
    out << "\n";
    const bool have_entropy = batch.entropies.size() == batch.size();
    for (int i = 0; i < batch.size(); ++i) {
        out << i << ',' << batch.labels[static_cast<std::size_t>(i)] << ','
            << to_string(batch.stage) << ','
            << fmt_double(have_entropy ? batch.entropies(i) : 0.0);
        for (int j = 0; j < batch.dim(); ++j) {
            out << ',' << fmt_double(batch.points(i, j));
        }
        out << "\n";
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

SampleBatch read_batch_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("empty batch file: " + path.string());
    }
    int dim = -3; // idx,label,stage,entropy then d coordinates
    for (char c : line) {
        if (c == ',') ++dim;
    }
    if (dim < 1) {
        throw IoError("malformed batch header: " + path.string());
    }

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<double> entropies;
    Stage stage = Stage::data;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); // idx, unused
        std::getline(ss, cell, ',');
        labels.push_back(std::stoi(cell));
        std::getline(ss, cell, ',');
        stage = stage_from_string(cell);
        std::getline(ss, cell, ',');
        entropies.push_back(std::stod(cell));
        std::vector<double> coords;
        while (std::getline(ss, cell, ',')) {
            coords.push_back(std::stod(cell));
        }
        if (static_cast<int>(coords.size()) != dim) {
            throw IoError("ragged batch row in " + path.string());
        }
        rows.push_back(std::move(coords));
    }

    SampleBatch batch;
    batch.stage = stage;
    batch.labels = std::move(labels);
    batch.points.resize(static_cast<Eigen::Index>(rows.size()), dim);
    batch.entropies.resize(static_cast<Eigen::Index>(entropies.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        batch.entropies(static_cast<Eigen::Index>(i)) = entropies[i];
        for (int j = 0; j < dim; ++j) {
            batch.points(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        }
    }
    return batch;
}

} // namespace umst
