#include "sit/mlp.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/rng.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sit {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

} // namespace

std::string prediction_name(Prediction p)
{
    return p == Prediction::Velocity ? "velocity" : "score";
}

Prediction parse_prediction(std::string_view text)
{
    if (text == "velocity")
        return Prediction::Velocity;
    if (text == "score")
        return Prediction::Score;
    throw ConfigError("unknown prediction '" + std::string(text) + "' (expected velocity, score)");
}

Mlp::Mlp(MlpConfig config) : config_(std::move(config))
{
    if (config_.data_dim == 0)
        throw ConfigError("network data dimension must be positive");
    if (config_.time_frequencies < 1 || !(config_.frequency_min > 0.0) || !(config_.frequency_max >= config_.frequency_min))
        throw ConfigError("invalid time embedding");
    if (config_.classes < 0 || (config_.classes > 0 && config_.class_embed_dim < 1))
        throw ConfigError("invalid class embedding");

    const int F = config_.time_frequencies;
    for (int k = 0; k < F; ++k) {
        const double frac = F == 1 ? 0.0 : static_cast<double>(k) / (F - 1);
        frequencies_.push_back(config_.frequency_min * std::pow(config_.frequency_max / config_.frequency_min, frac));
    }

    std::size_t offset = 0;
    std::size_t in = config_.input_dim();
    auto add = [&](std::size_t out) {
        layers_.push_back({in, out, offset, offset + in * out});
        offset += in * out + out;
        in = out;
    };
    for (std::size_t h : config_.hidden)
        add(h);
    add(config_.data_dim);
    embed_offset_ = offset;
    if (config_.classes > 0)
        offset += static_cast<std::size_t>(config_.class_embed_dim) * static_cast<std::size_t>(config_.classes + 1);
    params_.assign(offset, 0.0);
}

void Mlp::initialize(std::uint64_t seed)
{
    Rng rng(seed);
    for (const auto& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (std::size_t i = 0; i < layer.in * layer.out; ++i)
            params_[layer.weight_offset + i] = rng.uniform(-bound, bound);
        for (std::size_t i = 0; i < layer.out; ++i)
            params_[layer.bias_offset + i] = rng.uniform(-bound, bound);
    }
    for (std::size_t i = embed_offset_; i < params_.size(); ++i)
        params_[i] = rng.gaussian();
}

Matrix Mlp::time_features(std::span<const double> t) const
{
    const auto F = frequencies_.size();
    Matrix out(static_cast<Eigen::Index>(2 * F), static_cast<Eigen::Index>(t.size()));
    for (std::size_t b = 0; b < t.size(); ++b)
        for (std::size_t k = 0; k < F; ++k) {
            const double arg = frequencies_[k] * t[b];
            out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = std::sin(arg);
            out(static_cast<Eigen::Index>(F + k), static_cast<Eigen::Index>(b)) = std::cos(arg);
        }
    return out;
}

Matrix Mlp::forward(const Matrix& x, std::span<const double> t, std::span<const int> labels, Tape* tape) const
{
    const auto B = x.cols();
    const auto d = static_cast<Eigen::Index>(config_.data_dim);
    if (x.rows() != d || static_cast<Eigen::Index>(t.size()) != B)
        throw DomainError("network input shape mismatch");
    if (config_.classes > 0 && static_cast<Eigen::Index>(labels.size()) != B)
        throw DomainError("network label count mismatch");

    Matrix input(static_cast<Eigen::Index>(config_.input_dim()), B);
    input.topRows(d) = x;
    input.middleRows(d, static_cast<Eigen::Index>(config_.time_features())) = time_features(t);

    std::vector<int> rows;
    if (config_.classes > 0) {
        const auto E = static_cast<Eigen::Index>(config_.class_embed_dim);
        ConstMatrixMap table(params_.data() + embed_offset_, E, config_.classes + 1);
        rows.resize(static_cast<std::size_t>(B));
        for (Eigen::Index b = 0; b < B; ++b) {
            const int label = labels[static_cast<std::size_t>(b)];
            if (label >= config_.classes)
                throw DomainError("class label out of range");
            const int row = label < 0 ? config_.classes : label;
            rows[static_cast<std::size_t>(b)] = row;
            input.block(d + static_cast<Eigen::Index>(config_.time_features()), b, E, 1) = table.col(row);
        }
    }

    Matrix h = input;
    if (tape) {
        tape->pre.clear();
        tape->post.clear();
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        ConstMatrixMap W(params_.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.out),
                         static_cast<Eigen::Index>(layer.in));
        ConstVectorMap bias(params_.data() + layer.bias_offset, static_cast<Eigen::Index>(layer.out));
        Matrix z = W * h;
        z.colwise() += bias;
        if (l + 1 == layers_.size()) {
            h = std::move(z);
            break;
        }
        Matrix a = z.unaryExpr([](double v) { return v * sigmoid(v); });
        if (tape)
            tape->pre.push_back(std::move(z));
        h = std::move(a);
        if (tape)
            tape->post.push_back(h);
    }
    if (tape) {
        tape->input = std::move(input);
        tape->class_rows = std::move(rows);
    }
    return h;
}

void Mlp::backward(const Tape& tape, const Matrix& grad_output, std::span<double> grad) const
{
    if (grad.size() != params_.size())
        throw DomainError("gradient buffer size mismatch");
    Matrix g = grad_output;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& layer = layers_[li];
        const Matrix& below = li == 0 ? tape.input : tape.post[li - 1];
        ConstMatrixMap W(params_.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.out),
                         static_cast<Eigen::Index>(layer.in));
        MatrixMap gW(grad.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.out),
                     static_cast<Eigen::Index>(layer.in));
        VectorMap gb(grad.data() + layer.bias_offset, static_cast<Eigen::Index>(layer.out));
        gW.noalias() += g * below.transpose();
        gb += g.rowwise().sum();
        Matrix g_below = W.transpose() * g;
        if (li > 0) {
            const Matrix& z = tape.pre[li - 1];
            g_below.array() *= z.unaryExpr([](double v) {
                const double s = sigmoid(v);
                return s * (1.0 + v * (1.0 - s));
            }).array();
        } else if (config_.classes > 0) {
            const auto E = static_cast<Eigen::Index>(config_.class_embed_dim);
            const auto first = static_cast<Eigen::Index>(config_.data_dim + config_.time_features());
            MatrixMap table(grad.data() + embed_offset_, E, config_.classes + 1);
            for (std::size_t b = 0; b < tape.class_rows.size(); ++b)
                table.col(tape.class_rows[b]) += g_below.block(first, static_cast<Eigen::Index>(b), E, 1);
        }
        g = std::move(g_below);
    }
}

MlpField::MlpField(Mlp network, Schedule schedule, Prediction prediction)
    : network_(std::move(network)), schedule_(schedule), prediction_(prediction)
{
}

std::optional<Conditioning> MlpField::conditioning() const
{
    if (network_.config().classes == 0)
        return std::nullopt;
    return Conditioning{network_.config().classes};
}

void MlpField::evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const
{
    check_label(y);
    Matrix in = ConstMatrixMap(x.data(), static_cast<Eigen::Index>(x.size()), 1);
    const double ts[1] = {t};
    const int labels[1] = {y ? *y : -1};
    const Matrix result = network_.forward(in, ts, network_.config().classes > 0 ? std::span<const int>(labels) : std::span<const int>{});
    std::copy(result.data(), result.data() + out.size(), out.begin());
}

void MlpField::evaluate_batch(const Samples& x, double t, ClassLabel y, Samples& out) const
{
    check_label(y);
    const auto B = static_cast<std::size_t>(x.rows());
    const std::vector<double> ts(B, t);
    const std::vector<int> labels(network_.config().classes > 0 ? B : 0, y ? *y : -1);
    out = network_.forward(x.transpose(), ts, labels).transpose();
}

void MlpField::evaluate_points(const Samples& x, std::span<const double> t, std::span<const int> labels,
                               Samples& out) const
{
    std::vector<int> ls;
    if (network_.config().classes > 0) {
        ls.assign(static_cast<std::size_t>(x.rows()), -1);
        for (std::size_t i = 0; i < labels.size() && i < ls.size(); ++i)
            ls[i] = labels[i];
    } else {
        for (int l : labels)
            if (l >= 0)
                throw ConfigError("class label given to an unconditional model");
    }
    out = network_.forward(x.transpose(), t, ls).transpose();
}

void MlpField::save(std::ostream& out) const
{
    const auto& c = network_.config();
    out << "sit-checkpoint 1\n";
    out << "schedule " << schedule_.name() << '\n';
    out << "prediction " << prediction_name(prediction_) << '\n';
    out << "data_dim " << c.data_dim << '\n';
    out << "hidden";
    for (auto h : c.hidden)
        out << ' ' << h;
    out << '\n';
    out << "activation silu\n";
    out << "time_frequencies " << c.time_frequencies << ' ' << format_double(c.frequency_min) << ' '
        << format_double(c.frequency_max) << '\n';
    out << "classes " << c.classes << ' ' << c.class_embed_dim << '\n';
    const auto p = network_.parameters();
    out << "parameters " << p.size() << '\n';
    for (double v : p)
        out << format_double(v) << '\n';
}

void MlpField::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write checkpoint '" + path + "'");
    save(out);
}

namespace {

std::istringstream expect_line(std::istream& in, std::string_view key)
{
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("checkpoint truncated before '" + std::string(key) + "'");
    std::istringstream fields(line);
    std::string k;
    fields >> k;
    if (k != key)
        throw ConfigError("checkpoint: expected '" + std::string(key) + "', found '" + k + "'");
    return fields;
}

} // namespace

MlpField MlpField::load(std::istream& in)
{
    auto header = expect_line(in, "sit-checkpoint");
    int version = 0;
    header >> version;
    if (version != 1)
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));

    std::string token;
    expect_line(in, "schedule") >> token;
    const Schedule schedule = parse_schedule(token);
    expect_line(in, "prediction") >> token;
    const Prediction prediction = parse_prediction(token);

    MlpConfig c;
    expect_line(in, "data_dim") >> c.data_dim;
    auto hidden = expect_line(in, "hidden");
    c.hidden.clear();
    for (std::size_t h; hidden >> h;)
        c.hidden.push_back(h);
    expect_line(in, "activation") >> token;
    if (token != "silu")
        throw ConfigError("unsupported activation '" + token + "'");
    auto tf = expect_line(in, "time_frequencies");
    std::string fmin, fmax;
    tf >> c.time_frequencies >> fmin >> fmax;
    c.frequency_min = parse_double(fmin);
    c.frequency_max = parse_double(fmax);
    expect_line(in, "classes") >> c.classes >> c.class_embed_dim;

    Mlp network(c);
    std::size_t count = 0;
    expect_line(in, "parameters") >> count;
    if (count != network.parameter_count())
        throw ConfigError("checkpoint parameter count " + std::to_string(count) + " does not match layout (" +
                          std::to_string(network.parameter_count()) + ")");
    auto params = network.parameters();
    std::string line;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            throw ConfigError("checkpoint truncated in parameter block");
        params[i] = parse_double(line);
    }
    return MlpField(std::move(network), schedule, prediction);
}

MlpField MlpField::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open checkpoint '" + path + "'");
    return load(in);
}

} // namespace sit
