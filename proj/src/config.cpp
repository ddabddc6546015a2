#include "sit/config.hpp"

#include "sit/errors.hpp"
#include "sit/io.hpp"
#include "sit/toybox.hpp"

#include <json.hpp>

#include <cstdlib>
#include <set>

namespace sit {

using json = nlohmann::ordered_json;

namespace {

template <class T>
json optional_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

/// Reads known keys from an object and rejects the rest.
class Reader {
public:
    Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where))
    {
        if (!obj_.is_object())
            throw ConfigError(where_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!obj_.contains(key))
            return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out)
    {
        seen_.insert(key);
        if (!obj_.contains(key))
            return;
        if (obj_.at(key).is_null()) {
            out.reset();
            return;
        }
        T value{};
        get(key, value);
        out = value;
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        return obj_.contains(key) ? &obj_.at(key) : nullptr;
    }

    void finish() const
    {
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k))
                throw ConfigError("unknown config key '" + where_ + "." + k + "'");
    }

private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

} // namespace

void ExperimentConfig::validate() const
{
    if (dataset_preset.empty() == dataset_file.empty())
        throw ConfigError("config needs exactly one of dataset.preset and dataset.file");
    if (!dataset_preset.empty())
        (void)preset(dataset_preset);
    (void)parse_schedule(schedule);
    (void)parse_prediction(prediction);
    (void)parse_objective(objective);
    (void)parse_sampler(sampler.kind);
    (void)parse_diffusion(sampler.diffusion);
    if (sampler.steps <= 0)
        throw ConfigError("sampler.steps must be positive");
    for (const auto& s : sweep.schedules)
        (void)parse_schedule(s);
    for (const auto& p : sweep.predictions)
        (void)parse_prediction(p);
    for (const auto& k : sweep.samplers)
        (void)parse_sampler(k);
    for (const auto& d : sweep.diffusions)
        (void)parse_diffusion(d);
    for (int k : sweep.nfe)
        if (k < 2)
            throw ConfigError("sweep NFE values must be at least 2");
    static const std::set<std::string> known{"energy", "ks", "occupancy", "permutation", "path-length", "kl-bound"};
    for (const auto& m : eval.metrics)
        if (!known.count(m))
            throw ConfigError("unknown metric '" + m + "'");
    if (train.hidden.empty())
        throw ConfigError("train.hidden needs at least one layer");
}

std::string ExperimentConfig::output_root() const
{
    if (!output_dir.empty())
        return output_dir;
    if (const char* env = std::getenv("SIT_OUTPUT_ROOT"); env && *env)
        return env;
    return ".";
}

TrainConfig ExperimentConfig::train_config() const
{
    TrainConfig c;
    c.objective = parse_objective(objective);
    c.schedule = parse_schedule(schedule);
    c.network.hidden = train.hidden;
    c.batch = train.batch;
    c.steps = train.steps;
    c.learning_rate = train.learning_rate;
    c.label_dropout = train.label_dropout;
    c.conditional = train.conditional;
    c.t_lo = train.t_lo;
    c.t_hi = train.t_hi;
    c.profile_bins = train.profile_bins;
    c.profile_draws = train.profile_draws;
    c.seed = seed;
    return c;
}

SamplerSpec ExperimentConfig::sampler_spec(const Schedule& s, Prediction p) const
{
    SamplerSpec spec;
    spec.kind = parse_sampler(sampler.kind);
    const SamplerWindow window = default_window(s, p, spec.kind);
    spec.t_start = sampler.t_start.value_or(window.t_start);
    spec.t_end = sampler.t_end.value_or(window.t_end);
    spec.steps = sampler.steps;
    spec.diffusion = parse_diffusion(sampler.diffusion);
    if (spec.kind == SamplerKind::EulerMaruyamaSde && !sampler.no_last_step)
        spec.last_step_to = sampler.last_step_to ? sampler.last_step_to : window.last_step_to;
    spec.guidance_zeta = sampler.zeta;
    spec.seed = seed;
    return spec;
}

std::string to_json(const ExperimentConfig& c)
{
    json doc;
    doc["seed"] = c.seed;
    doc["output"] = c.output_dir;
    doc["dataset"] = {{"preset", c.dataset_preset}, {"file", c.dataset_file}};
    doc["schedule"] = c.schedule;
    doc["prediction"] = c.prediction;
    doc["objective"] = c.objective;
    doc["train"] = {{"steps", c.train.steps},
                    {"batch", c.train.batch},
                    {"learning_rate", c.train.learning_rate},
                    {"label_dropout", c.train.label_dropout},
                    {"conditional", c.train.conditional},
                    {"hidden", c.train.hidden},
                    {"t_lo", optional_json(c.train.t_lo)},
                    {"t_hi", optional_json(c.train.t_hi)},
                    {"profile_bins", c.train.profile_bins},
                    {"profile_draws", c.train.profile_draws}};
    doc["model"] = {{"checkpoint", c.checkpoint}, {"profile", c.profile}};
    doc["sampler"] = {{"kind", c.sampler.kind},
                      {"steps", c.sampler.steps},
                      {"t_start", optional_json(c.sampler.t_start)},
                      {"t_end", optional_json(c.sampler.t_end)},
                      {"last_step_to", optional_json(c.sampler.last_step_to)},
                      {"no_last_step", c.sampler.no_last_step},
                      {"diffusion", c.sampler.diffusion},
                      {"zeta", optional_json(c.sampler.zeta)},
                      {"class", optional_json(c.sampler.label)},
                      {"n", c.sampler.n}};
    doc["eval"] = {{"metrics", c.eval.metrics},
                   {"reference_n", c.eval.reference_n},
                   {"permutations", c.eval.permutations},
                   {"path_n", c.eval.path_n},
                   {"path_points", c.eval.path_points}};
    doc["sweep"] = {{"schedules", c.sweep.schedules},     {"predictions", c.sweep.predictions},
                    {"samplers", c.sweep.samplers},       {"diffusions", c.sweep.diffusions},
                    {"nfe", c.sweep.nfe},                 {"n", c.sweep.n}};
    return doc.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    Reader top(doc, "config");
    top.get("seed", c.seed);
    top.get("output", c.output_dir);
    top.get("schedule", c.schedule);
    top.get("prediction", c.prediction);
    top.get("objective", c.objective);
    if (const json* d = top.child("dataset")) {
        Reader r(*d, "dataset");
        c.dataset_preset.clear();
        r.get("preset", c.dataset_preset);
        r.get("file", c.dataset_file);
        r.finish();
    }
    if (const json* t = top.child("train")) {
        Reader r(*t, "train");
        r.get("steps", c.train.steps);
        r.get("batch", c.train.batch);
        r.get("learning_rate", c.train.learning_rate);
        r.get("label_dropout", c.train.label_dropout);
        r.get("conditional", c.train.conditional);
        r.get("hidden", c.train.hidden);
        r.get("t_lo", c.train.t_lo);
        r.get("t_hi", c.train.t_hi);
        r.get("profile_bins", c.train.profile_bins);
        r.get("profile_draws", c.train.profile_draws);
        r.finish();
    }
    if (const json* m = top.child("model")) {
        Reader r(*m, "model");
        r.get("checkpoint", c.checkpoint);
        r.get("profile", c.profile);
        r.finish();
    }
    if (const json* s = top.child("sampler")) {
        Reader r(*s, "sampler");
        r.get("kind", c.sampler.kind);
        r.get("steps", c.sampler.steps);
        r.get("t_start", c.sampler.t_start);
        r.get("t_end", c.sampler.t_end);
        r.get("last_step_to", c.sampler.last_step_to);
        r.get("no_last_step", c.sampler.no_last_step);
        r.get("diffusion", c.sampler.diffusion);
        r.get("zeta", c.sampler.zeta);
        r.get("class", c.sampler.label);
        r.get("n", c.sampler.n);
        r.finish();
    }
    if (const json* e = top.child("eval")) {
        Reader r(*e, "eval");
        r.get("metrics", c.eval.metrics);
        r.get("reference_n", c.eval.reference_n);
        r.get("permutations", c.eval.permutations);
        r.get("path_n", c.eval.path_n);
        r.get("path_points", c.eval.path_points);
        r.finish();
    }
    if (const json* s = top.child("sweep")) {
        Reader r(*s, "sweep");
        r.get("schedules", c.sweep.schedules);
        r.get("predictions", c.sweep.predictions);
        r.get("samplers", c.sweep.samplers);
        r.get("diffusions", c.sweep.diffusions);
        r.get("nfe", c.sweep.nfe);
        r.get("n", c.sweep.n);
        r.finish();
    }
    top.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    return config_from_json(read_file(path));
}

} // namespace sit
