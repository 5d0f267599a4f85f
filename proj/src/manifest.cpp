// Copyright (C) 2026 The UMST Authors
// SPDX-License-Identifier: Apache-2.0

#include "umst/manifest.hpp"

#include "umst/common.hpp"
#include "umst/sampler.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace umst {

namespace {

using Json = nlohmann::ordered_json;

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const std::string& context)
{
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items()) {
        if (!ok.count(item.key())) {
            throw ManifestError("unknown key '" + item.key() + "' in " + context);
        }
    }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out)
{
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const Json::exception& e) {
            throw ManifestError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

ScheduleSpec parse_schedule(const Json& j, const std::string& context)
{
    check_keys(j, {"kind", "T", "beta_min", "beta_max"}, context);
    ScheduleSpec spec;
    std::string kind = to_string(spec.kind);
    read_if(j, "kind", kind);
    spec.kind = schedule_kind_from_string(kind);
    read_if(j, "T", spec.steps);
    read_if(j, "beta_min", spec.beta_min);
    read_if(j, "beta_max", spec.beta_max);
    return spec;
}

Json schedule_to_json(const ScheduleSpec& spec)
{
    Json j;
    j["kind"] = to_string(spec.kind);
    j["T"] = spec.steps;
    j["beta_min"] = spec.beta_min;
    j["beta_max"] = spec.beta_max;
    return j;
}

} // namespace

ExperimentManifest default_manifest()
{
    ExperimentManifest m;
    const GaussianMixtureOracle world = GaussianMixtureOracle::default_world();
    for (const auto& comp : world.components()) {
        OracleComponentSpec spec;
        spec.mean.assign(comp.mean.data(), comp.mean.data() + comp.mean.size());
        spec.covariance.resize(static_cast<std::size_t>(comp.cov.rows()));
        for (Eigen::Index r = 0; r < comp.cov.rows(); ++r) {
            spec.covariance[static_cast<std::size_t>(r)].assign(
                comp.cov.row(r).begin(), comp.cov.row(r).end());
        }
        spec.label = comp.label;
        spec.weight = comp.weight;
        m.world.oracle.push_back(std::move(spec));
    }
    return m;
}

ExperimentManifest parse_manifest(const std::string& json_text)
{
    Json j = Json::parse(json_text, nullptr, false);
    if (j.is_discarded()) {
        throw ManifestError("manifest is not valid JSON");
    }
    check_keys(j,
               {"version", "seed", "schedule", "world", "training", "generation",
                "roundtrip", "outputs"},
               "manifest");
    if (!j.contains("version")) {
        throw ManifestError("manifest is missing the required 'version' field");
    }

    ExperimentManifest m = default_manifest();
    m.version = j.at("version").get<int>();
    if (m.version != 1) {
        throw ManifestError("unsupported manifest version " + std::to_string(m.version));
    }
    read_if(j, "seed", m.seed);
    read_if(j, "outputs", m.outputs);

    if (j.contains("schedule")) {
        m.schedule = parse_schedule(j.at("schedule"), "schedule");
    }
    if (j.contains("roundtrip")) {
        const Json& rt = j.at("roundtrip");
        check_keys(rt, {"schedule", "tolerance"}, "roundtrip");
        if (rt.contains("schedule")) {
            m.roundtrip.schedule = parse_schedule(rt.at("schedule"), "roundtrip.schedule");
        }
        read_if(rt, "tolerance", m.roundtrip.tolerance);
    }

    if (j.contains("world")) {
        const Json& w = j.at("world");
        check_keys(w, {"oracle", "phantoms", "protocols", "image_size"}, "world");
        if (w.contains("oracle")) {
            m.world.oracle.clear();
            for (const Json& cj : w.at("oracle")) {
                check_keys(cj, {"mean", "covariance", "label", "weight"}, "world.oracle[]");
                OracleComponentSpec comp;
                read_if(cj, "mean", comp.mean);
                read_if(cj, "covariance", comp.covariance);
                read_if(cj, "label", comp.label);
                read_if(cj, "weight", comp.weight);
                m.world.oracle.push_back(std::move(comp));
            }
        }
        read_if(w, "phantoms", m.world.phantoms);
        read_if(w, "protocols", m.world.protocols);
        read_if(w, "image_size", m.world.image_size);
    }

    if (j.contains("training")) {
        const Json& t = j.at("training");
        check_keys(t,
                   {"steps", "batch_size", "lr", "beta1", "beta2", "denoiser_hidden",
                    "classifier_hidden", "time_embed_width", "timestep_weight"},
                   "training");
        read_if(t, "steps", m.training.steps);
        read_if(t, "batch_size", m.training.batch_size);
        read_if(t, "lr", m.training.lr);
        read_if(t, "beta1", m.training.beta1);
        read_if(t, "beta2", m.training.beta2);
        read_if(t, "denoiser_hidden", m.training.denoiser_hidden);
        read_if(t, "classifier_hidden", m.training.classifier_hidden);
        read_if(t, "time_embed_width", m.training.time_embed_width);
        read_if(t, "timestep_weight", m.training.timestep_weight);
    }

    if (j.contains("generation")) {
        const Json& g = j.at("generation");
        check_keys(g,
                   {"class_scale", "uncertainty_scale", "n_per_class", "model",
                    "gradient_source"},
                   "generation");
        read_if(g, "class_scale", m.generation.class_scale);
        read_if(g, "uncertainty_scale", m.generation.uncertainty_scale);
        read_if(g, "n_per_class", m.generation.n_per_class);
        read_if(g, "model", m.generation.model);
        read_if(g, "gradient_source", m.generation.gradient_source);
        if (m.generation.model != "oracle" && m.generation.model != "trained") {
            throw ManifestError("generation.model must be 'oracle' or 'trained'");
        }
        gradient_source_from_string(m.generation.gradient_source);
    }
    return m;
}

std::string serialize_manifest(const ExperimentManifest& m)
{
    Json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["schedule"] = schedule_to_json(m.schedule);

    Json w;
    w["oracle"] = Json::array();
    for (const auto& comp : m.world.oracle) {
        Json cj;
        cj["mean"] = comp.mean;
        cj["covariance"] = comp.covariance;
        cj["label"] = comp.label;
        cj["weight"] = comp.weight;
        w["oracle"].push_back(cj);
    }
    w["phantoms"] = m.world.phantoms;
    w["protocols"] = m.world.protocols;
    w["image_size"] = m.world.image_size;
    j["world"] = w;

    Json t;
    t["steps"] = m.training.steps;
    t["batch_size"] = m.training.batch_size;
    t["lr"] = m.training.lr;
    t["beta1"] = m.training.beta1;
    t["beta2"] = m.training.beta2;
    t["denoiser_hidden"] = m.training.denoiser_hidden;
    t["classifier_hidden"] = m.training.classifier_hidden;
    t["time_embed_width"] = m.training.time_embed_width;
    t["timestep_weight"] = m.training.timestep_weight;
    j["training"] = t;

    Json g;
    g["class_scale"] = m.generation.class_scale;
    g["uncertainty_scale"] = m.generation.uncertainty_scale;
    g["n_per_class"] = m.generation.n_per_class;
    g["model"] = m.generation.model;
    g["gradient_source"] = m.generation.gradient_source;
    j["generation"] = g;

    Json rt;
    rt["schedule"] = schedule_to_json(m.roundtrip.schedule);
    rt["tolerance"] = m.roundtrip.tolerance;
    j["roundtrip"] = rt;

    j["outputs"] = m.outputs;
    return j.dump(2) + "\n";
}

ExperimentManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_manifest(text);
}

void save_manifest(const std::filesystem::path& path, const ExperimentManifest& manifest)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open manifest for writing: " + path.string());
    }
    out << serialize_manifest(manifest);
}

GaussianMixtureOracle build_oracle(const WorldSpec& world)
{
    if (world.oracle.empty()) {
        throw ManifestError("world.oracle has no components");
    }
    std::vector<GmComponent> comps;
    for (const auto& spec : world.oracle) {
        GmComponent comp;
        const auto d = static_cast<Eigen::Index>(spec.mean.size());
        comp.mean = Eigen::Map<const Eigen::VectorXd>(spec.mean.data(), d);
        comp.cov.resize(d, d);
        if (static_cast<Eigen::Index>(spec.covariance.size()) != d) {
            throw ManifestError("oracle covariance row count does not match the mean");
        }
        for (Eigen::Index r = 0; r < d; ++r) {
            const auto& row = spec.covariance[static_cast<std::size_t>(r)];
            if (static_cast<Eigen::Index>(row.size()) != d) {
                throw ManifestError("oracle covariance is not square");
            }
            for (Eigen::Index c = 0; c < d; ++c) {
                comp.cov(r, c) = row[static_cast<std::size_t>(c)];
            }
        }
        comp.label = spec.label;
        comp.weight = spec.weight;
        comps.push_back(std::move(comp));
    }
    return GaussianMixtureOracle(std::move(comps));
}

std::string manifest_hash(const ExperimentManifest& manifest)
{
    const std::string text = serialize_manifest(manifest);
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace umst
