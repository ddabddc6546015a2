#include "sit/experiment.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/io.hpp"
#include "sit/rng.hpp"
#include "sit/sampler.hpp"
#include "sit/toybox.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace sit {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kReferenceStream = 0x7265666572656e63ULL;

GaussianMixture dataset_mixture(const ExperimentConfig& config)
{
    if (config.dataset_preset.empty())
        throw ConfigError("this command needs dataset.preset (an exact reference distribution)");
    return preset(config.dataset_preset);
}

std::shared_ptr<const LossProfile> load_profile(const ExperimentConfig& config)
{
    if (config.profile.empty())
        return nullptr;
    if (!fs::exists(config.profile))
        throw ConfigError("profile file not found: " + config.profile);
    return std::make_shared<const LossProfile>(LossProfile::load(config.profile));
}

DiffusionCoefficient resolve_diffusion(const ExperimentConfig& config, const std::string& name)
{
    DiffusionCoefficient d = parse_diffusion(name);
    if (d.needs_profile()) {
        auto profile = load_profile(config);
        if (!profile)
            throw ConfigError("diffusion '" + name + "' requires a per-time loss profile L_t (--profile)");
        d = d.with_profile(std::move(profile));
    }
    return d;
}

ClassLabel label_of(const ExperimentConfig& config)
{
    return config.sampler.label ? ClassLabel(*config.sampler.label) : ClassLabel{};
}

/// Reference law for evaluation: the class component when a class is set.
GaussianMixture reference_law(const ExperimentConfig& config)
{
    GaussianMixture gmm = dataset_mixture(config);
    if (config.sampler.label) {
        const int k = *config.sampler.label;
        if (k < 0 || static_cast<std::size_t>(k) >= gmm.size())
            throw ConfigError("class " + std::to_string(k) + " outside the preset's labels");
        if (!config.sampler.zeta || *config.sampler.zeta == 1.0)
            return gmm.component(static_cast<std::size_t>(k));
    }
    return gmm;
}

SampleResult run_sampler(const FieldModel& model, const SamplerSpec& spec, std::size_t n, ClassLabel y)
{
    return sample(model, spec, n, y, Exec::Parallel);
}

void add_distribution_metrics(MetricReport& report, const std::vector<std::string>& metrics, const Samples& x,
                              const Samples& reference, const std::optional<GaussianMixture>& gmm,
                              const ExperimentConfig& config)
{
    for (const auto& m : metrics) {
        if (m == "energy") {
            report.set("energy_distance", energy_distance(x, reference));
        } else if (m == "ks") {
            const auto ks = ks_statistics(x, reference);
            for (std::size_t k = 0; k < ks.size(); ++k)
                report.set("ks_axis" + std::to_string(k), ks[k]);
        } else if (m == "occupancy") {
            if (!gmm)
                throw ConfigError("occupancy needs a mixture preset as reference");
            const auto occ = mode_occupancy(x, *gmm);
            for (std::size_t k = 0; k < occ.size(); ++k)
                report.set("occupancy_" + std::to_string(k), occ[k]);
        } else if (m == "permutation") {
            const auto test = energy_permutation_test(x, reference, config.eval.permutations,
                                                      derive_seed(config.seed, kReferenceStream + 1));
            report.set("permutation_p_value", test.p_value);
            report.set("permutation_null_q99", test.null_quantile(0.99));
        }
    }
}

std::string report_text(const MetricReport& report)
{
    std::ostringstream out;
    report.write_text(out);
    return out.str();
}

MetricReport parse_report(const std::string& text)
{
    MetricReport report;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto sp = line.find(' ');
        if (sp == std::string::npos)
            continue;
        report.set_text(line.substr(0, sp), line.substr(sp + 1));
    }
    return report;
}

std::string file_safe(std::string s)
{
    for (char& c : s)
        if (c == ':' || c == '/' || c == ' ' || c == '=')
            c = '-';
    return s;
}

} // namespace

std::unique_ptr<FieldModel> make_model(const ExperimentConfig& config, const Schedule& s, Prediction p)
{
    if (!config.checkpoint.empty()) {
        if (!fs::exists(config.checkpoint))
            throw ConfigError("checkpoint not found: " + config.checkpoint);
        return std::make_unique<MlpField>(MlpField::load(config.checkpoint));
    }
    return std::make_unique<AnalyticGmmField>(dataset_mixture(config), s, p);
}

std::unique_ptr<FieldModel> make_model(const ExperimentConfig& config)
{
    return make_model(config, parse_schedule(config.schedule), parse_prediction(config.prediction));
}

TrainingData load_training_data(const ExperimentConfig& config)
{
    if (!config.dataset_file.empty()) {
        if (!fs::exists(config.dataset_file))
            throw ConfigError("dataset file not found: " + config.dataset_file);
        SampleFile file = load_samples(config.dataset_file);
        return TrainingData::from_samples(std::move(file.x), std::move(file.labels));
    }
    return TrainingData::from_mixture(dataset_mixture(config));
}

TrainOutputs cmd_train(const ExperimentConfig& config, const std::string& checkpoint_path)
{
    config.validate();
    const TrainingData data = load_training_data(config);
    const TrainResult result = train(config.train_config(), data);

    TrainOutputs out{checkpoint_path, checkpoint_path + ".profile", checkpoint_path + ".curve"};
    std::ostringstream ckpt, profile, curve;
    result.model.save(ckpt);
    result.profile.write(profile);
    curve << "# step loss\n";
    for (std::size_t k = 0; k < result.curve.size(); ++k)
        curve << k << ' ' << format_double(result.curve[k]) << '\n';
    write_file_atomic(out.checkpoint, ckpt.str());
    write_file_atomic(out.profile, profile.str());
    write_file_atomic(out.curve, curve.str());
    return out;
}

std::size_t cmd_sample(const ExperimentConfig& config, const std::string& out_path)
{
    config.validate();
    if (config.sampler.n == 0)
        throw ConfigError("sampler.n must be positive");
    const auto model = make_model(config);
    SamplerSpec spec = config.sampler_spec(model->schedule(), model->prediction());
    spec.diffusion = resolve_diffusion(config, config.sampler.diffusion);
    const ClassLabel y = label_of(config);
    const SampleResult result = run_sampler(*model, spec, config.sampler.n, y);

    SampleFile file;
    file.x = result.samples;
    file.seed = config.seed;
    file.nfe = result.nfe_per_trajectory;
    if (y)
        file.labels.assign(config.sampler.n, *y);
    save_samples(out_path, file);
    return result.nfe_per_trajectory;
}

MetricReport cmd_eval(const ExperimentConfig& config, const std::string& samples_path, const std::string& report_path,
                      const std::string& json_path)
{
    config.validate();
    if (!fs::exists(samples_path))
        throw ConfigError("sample file not found: " + samples_path);
    const SampleFile file = load_samples(samples_path);
    if (file.x.rows() == 0)
        throw ConfigError("sample file is empty: " + samples_path);

    MetricReport report;
    report.set_text("note", "desk-scale surrogate metrics (not FID)");
    report.set("samples", static_cast<double>(file.x.rows()));
    report.set("sample_nfe", static_cast<double>(file.nfe));

    std::optional<GaussianMixture> gmm;
    Samples reference;
    if (!config.dataset_preset.empty()) {
        const GaussianMixture law = reference_law(config);
        if (law.dim() != static_cast<std::size_t>(file.x.cols()))
            throw ConfigError("dimension mismatch: samples have d=" + std::to_string(file.x.cols()) +
                              ", reference has d=" + std::to_string(law.dim()));
        reference = draw(law, config.eval.reference_n, derive_seed(config.seed, kReferenceStream)).x;
        gmm = dataset_mixture(config);
    } else {
        if (!fs::exists(config.dataset_file))
            throw ConfigError("dataset file not found: " + config.dataset_file);
        reference = load_samples(config.dataset_file).x;
        if (reference.cols() != file.x.cols())
            throw ConfigError("dimension mismatch between samples and reference file");
    }
    report.set("reference_samples", static_cast<double>(reference.rows()));
    report.set("seed", static_cast<double>(config.seed));
    add_distribution_metrics(report, config.eval.metrics, file.x, reference, gmm, config);

    for (const auto& m : config.eval.metrics) {
        if (m == "path-length") {
            const auto model = make_model(config);
            const SamplerWindow window =
                default_window(model->schedule(), model->prediction(), SamplerKind::HeunOde);
            const std::vector<double> grid = time_grid(window.t_end, window.t_start,
                                                       static_cast<int>(std::max<std::size_t>(config.eval.path_points, 2) - 1));
            const PathLength c = path_length(*model, dataset_mixture(config), config.eval.path_n, grid,
                                             derive_seed(config.seed, kReferenceStream + 2));
            report.set("path_length", c.value);
            report.set("path_length_se", c.standard_error);
        } else if (m == "kl-bound") {
            const auto profile = load_profile(config);
            if (!profile)
                throw ConfigError("kl-bound requires a per-time loss profile L_t (--profile)");
            const Schedule s = parse_schedule(config.schedule);
            const DiffusionCoefficient d = resolve_diffusion(config, config.sampler.diffusion);
            const SamplerSpec spec = config.sampler_spec(s, parse_prediction(config.prediction));
            const std::optional<double> eta =
                d.kind() == DiffusionKind::KLEta ? std::optional<double>(d.eta()) : std::nullopt;
            report.set("kl_bound", kl_bound(*profile, s, d, eta, std::min(spec.t_start, spec.t_end),
                                            std::max(spec.t_start, spec.t_end)));
        }
    }

    write_file_atomic(report_path, report_text(report));
    if (!json_path.empty()) {
        std::ostringstream js;
        report.write_json(js);
        write_file_atomic(json_path, js.str());
    }
    return report;
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& coordinates)
{
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : coordinates) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

SweepSummary cmd_sweep(const ExperimentConfig& config, const std::string& out_dir)
{
    config.validate();
    fs::create_directories(fs::path(out_dir) / "cells");
    write_file_atomic((fs::path(out_dir) / "config.json").string(), to_json(config));

    std::vector<std::string> schedules = config.sweep.schedules;
    std::vector<std::string> predictions = config.sweep.predictions;
    if (!config.checkpoint.empty()) {
        // A trained model fixes its own parameterisation.
        const auto model = make_model(config);
        schedules = {model->schedule().name()};
        predictions = {prediction_name(model->prediction())};
    }
    if (schedules.empty())
        schedules = {config.schedule};
    if (predictions.empty())
        predictions = {config.prediction};

    const ClassLabel y = label_of(config);
    const GaussianMixture law = reference_law(config);
    const GaussianMixture full = dataset_mixture(config);
    const Samples reference = draw(law, config.eval.reference_n, derive_seed(config.seed, kReferenceStream)).x;
    const Samples reference_b = draw(law, config.eval.reference_n, derive_seed(config.seed, kReferenceStream + 3)).x;
    const double noise_floor = energy_distance(reference, reference_b);

    SweepSummary summary;
    std::ostringstream table;
    table << "schedule\tprediction\tsampler\tw\tnfe\tsteps\tstatus\tenergy_distance\n";
    std::map<std::string, std::ostringstream> curves;

    for (const auto& sched_name : schedules) {
        const Schedule s = parse_schedule(sched_name);
        for (const auto& pred_name : predictions) {
            const Prediction p = parse_prediction(pred_name);
            std::unique_ptr<FieldModel> model;
            for (const auto& sampler_name : config.sweep.samplers) {
                const SamplerKind kind = parse_sampler(sampler_name);
                const std::vector<std::string> ws =
                    kind == SamplerKind::HeunOde ? std::vector<std::string>{"-"} : config.sweep.diffusions;
                for (const auto& w_name : ws) {
                    const std::string curve_key = s.name() + "_" + pred_name + "_" + sampler_name +
                                                  (w_name == "-" ? std::string() : "_" + w_name);
                    auto& curve = curves[file_safe(curve_key)];
                    if (curve.tellp() == 0)
                        curve << "# nfe energy_distance\n";
                    for (int target : config.sweep.nfe) {
                        ++summary.cells;
                        const std::string coords = "schedule=" + s.name() + ",prediction=" + pred_name +
                                                   ",sampler=" + sampler_name + ",w=" + w_name +
                                                   ",nfe=" + std::to_string(target);
                        const fs::path cell_path = fs::path(out_dir) / "cells" /
                                                   (file_safe(s.name() + "_" + pred_name + "_" + sampler_name + "_" +
                                                              (w_name == "-" ? "ode" : w_name) + "_nfe" +
                                                              std::to_string(target)) +
                                                    ".txt");
                        MetricReport report;
                        bool reused = false;
                        if (fs::exists(cell_path)) {
                            report = parse_report(read_file(cell_path.string()));
                            reused = report.get("nfe").has_value();
                        }
                        if (reused) {
                            ++summary.reused;
                        } else {
                            report = MetricReport();
                            report.set_text("cell", coords);
                            const std::uint64_t seed = cell_seed(config.seed, coords);
                            report.set_text("seed", std::to_string(seed));
                            try {
                                if (!model)
                                    model = make_model(config, s, p);
                                ExperimentConfig cell = config;
                                cell.sampler.kind = sampler_name;
                                if (w_name != "-")
                                    cell.sampler.diffusion = w_name;
                                SamplerSpec spec = cell.sampler_spec(model->schedule(), model->prediction());
                                spec.seed = seed;
                                if (kind == SamplerKind::EulerMaruyamaSde)
                                    spec.diffusion = resolve_diffusion(config, w_name);
                                // Largest step count whose evaluation count fits the NFE budget.
                                const int per_step = (kind == SamplerKind::HeunOde ? 2 : 1) * (spec.guidance_zeta ? 2 : 1);
                                const int fixed = kind == SamplerKind::EulerMaruyamaSde && spec.last_step_to
                                                      ? (spec.guidance_zeta ? 2 : 1)
                                                      : 0;
                                spec.steps = std::max(1, (target - fixed) / per_step);
                                const SampleResult result = run_sampler(*model, spec, config.sweep.n, y);
                                report.set_text("status", "ok");
                                report.set("nfe", static_cast<double>(result.nfe_per_trajectory));
                                report.set("steps", spec.steps);
                                report.set("t_start", spec.t_start);
                                report.set("t_end", spec.t_end);
                                report.set("noise_floor", noise_floor);
                                add_distribution_metrics(report, {"energy", "occupancy"}, result.samples, reference,
                                                         full, config);
                            } catch (const ConfigError&) {
                                throw;
                            } catch (const std::exception& e) {
                                report.set_text("status", "error");
                                report.set("nfe", target);
                                report.set_text("error", e.what());
                            }
                            write_file_atomic(cell_path.string(), report_text(report));
                        }
                        const auto status = [&] {
                            for (const auto& [k, v] : report.entries())
                                if (k == "status")
                                    return v;
                            return std::string("error");
                        }();
                        if (status != "ok")
                            ++summary.failed;
                        const std::string energy =
                            status == "ok" ? format_double(*report.get("energy_distance")) : std::string("nan");
                        const std::string steps =
                            report.get("steps") ? format_double(*report.get("steps")) : std::string("-");
                        table << s.name() << '\t' << pred_name << '\t' << sampler_name << '\t' << w_name << '\t'
                              << target << '\t' << steps << '\t' << status << '\t' << energy << '\n';
                        if (status == "ok")
                            curve << format_double(*report.get("nfe")) << ' ' << energy << '\n';
                    }
                }
            }
        }
    }
    write_file_atomic((fs::path(out_dir) / "sweep.tsv").string(), table.str());
    for (auto& [key, curve] : curves)
        write_file_atomic((fs::path(out_dir) / ("curve_" + key + ".txt")).string(), curve.str());
    std::ostringstream floor_text;
    floor_text << "noise_floor " << format_double(noise_floor) << '\n';
    write_file_atomic((fs::path(out_dir) / "noise_floor.txt").string(), floor_text.str());
    return summary;
}

void cmd_info(const ExperimentConfig& config, std::ostream& out, std::size_t points)
{
    if (points < 2)
        throw ConfigError("info needs at least two grid points");
    const Schedule s = parse_schedule(config.schedule);
    const DiffusionCoefficient d = resolve_diffusion(config, config.sampler.diffusion);
    auto cell = [](auto&& f) -> std::string {
        try {
            return format_double(f());
        } catch (const SingularityError&) {
            return "singular";
        }
    };
    out << "# schedule=" << s.name() << " diffusion=" << d.name() << '\n';
    out << "t alpha sigma alpha_dot sigma_dot lambda w\n";
    for (std::size_t k = 0; k < points; ++k) {
        const double t = k + 1 == points ? 1.0 : static_cast<double>(k) / static_cast<double>(points - 1);
        out << format_double(t) << ' ' << cell([&] { return s.alpha(t); }) << ' ' << cell([&] { return s.sigma(t); })
            << ' ' << cell([&] { return s.alpha_dot(t); }) << ' ' << cell([&] { return s.sigma_dot(t); }) << ' '
            << cell([&] { return s.lambda(t); }) << ' ' << cell([&] { return w(d, s, t); }) << '\n';
    }
}

} // namespace sit
