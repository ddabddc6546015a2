#include "sit/io.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/profile.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

namespace sit {

std::string format_double(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
    if (text == "inf" || text == "+inf")
        return HUGE_VAL;
    if (text == "-inf")
        return -HUGE_VAL;
    if (text == "nan")
        return std::nan("");
    std::string_view body = text;
    if (!body.empty() && body.front() == '+')
        body.remove_prefix(1);
    double value = 0.0;
    const auto res = std::from_chars(body.data(), body.data() + body.size(), value);
    if (body.empty() || res.ec != std::errc() || res.ptr != body.data() + body.size())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return value;
}

long long parse_int(std::string_view text)
{
    long long value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError("not an integer: '" + std::string(text) + "'");
    return value;
}

LossProfile::LossProfile(std::vector<double> edges, std::vector<double> values)
    : edges_(std::move(edges)), values_(std::move(values))
{
    if (values_.empty() || edges_.size() != values_.size() + 1)
        throw ConfigError("loss profile needs K values and K+1 edges");
    for (std::size_t k = 1; k < edges_.size(); ++k)
        if (!(edges_[k] > edges_[k - 1]))
            throw ConfigError("loss profile edges must increase");
    for (double v : values_)
        if (!std::isfinite(v) || v < 0.0)
            throw ConfigError("loss profile values must be finite and nonnegative");
}

double LossProfile::operator()(double t) const
{
    if (values_.empty())
        throw ConfigError("empty loss profile");
    const auto it = std::upper_bound(edges_.begin() + 1, edges_.end() - 1, t);
    return values_[static_cast<std::size_t>(it - (edges_.begin() + 1))];
}

void LossProfile::write(std::ostream& out) const
{
    out << "# sit-profile v1 bins=" << values_.size() << '\n';
    for (std::size_t k = 0; k < values_.size(); ++k)
        out << format_double(edges_[k]) << ' ' << format_double(edges_[k + 1]) << ' ' << format_double(values_[k])
            << '\n';
}

LossProfile LossProfile::read(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("# sit-profile v1 bins=", 0) != 0)
        throw ConfigError("not a loss profile (missing '# sit-profile v1' header)");
    const auto bins = parse_int(std::string_view(line).substr(22));
    std::vector<double> edges, values;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream row(line);
        std::string lo, hi, v;
        if (!(row >> lo >> hi >> v))
            throw ConfigError("malformed loss profile row: " + line);
        const double tlo = parse_double(lo), thi = parse_double(hi);
        if (edges.empty())
            edges.push_back(tlo);
        else if (edges.back() != tlo)
            throw ConfigError("loss profile bins are not contiguous");
        edges.push_back(thi);
        values.push_back(parse_double(v));
    }
    if (static_cast<long long>(values.size()) != bins)
        throw ConfigError("loss profile row count does not match header");
    return LossProfile(std::move(edges), std::move(values));
}

LossProfile LossProfile::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open loss profile '" + path + "'");
    return read(in);
}

void write_samples(std::ostream& out, const SampleFile& file)
{
    const bool labelled = !file.labels.empty();
    if (labelled && file.labels.size() != static_cast<std::size_t>(file.x.rows()))
        throw ConfigError("label count does not match sample count");
    out << "# d=" << file.x.cols() << " n=" << file.x.rows() << " seed=" << file.seed << " nfe=" << file.nfe;
    if (labelled)
        out << " labels=1";
    out << '\n';
    std::string row;
    for (Eigen::Index i = 0; i < file.x.rows(); ++i) {
        row.clear();
        for (Eigen::Index k = 0; k < file.x.cols(); ++k) {
            if (k)
                row += ' ';
            row += format_double(file.x(i, k));
        }
        if (labelled)
            row += ' ' + std::to_string(file.labels[static_cast<std::size_t>(i)]);
        row += '\n';
        out << row;
    }
}

SampleFile read_samples(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
        throw ConfigError("sample file is missing its '# d=... n=...' header");
    long long d = -1, n = -1;
    bool labelled = false;
    SampleFile file;
    std::istringstream header(line.substr(2));
    std::string field;
    while (header >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad sample header field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string_view value = std::string_view(field).substr(eq + 1);
        if (key == "d")
            d = parse_int(value);
        else if (key == "n")
            n = parse_int(value);
        else if (key == "seed")
            file.seed = static_cast<std::uint64_t>(std::stoull(std::string(value)));
        else if (key == "nfe")
            file.nfe = static_cast<std::size_t>(parse_int(value));
        else if (key == "labels")
            labelled = parse_int(value) != 0;
    }
    if (d <= 0 || n < 0)
        throw ConfigError("sample header needs d > 0 and n >= 0");
    file.x.resize(n, d);
    if (labelled)
        file.labels.resize(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
        if (!std::getline(in, line))
            throw ConfigError("sample file ends after " + std::to_string(i) + " of " + std::to_string(n) + " rows");
        std::istringstream row(line);
        std::string tok;
        for (long long k = 0; k < d; ++k) {
            if (!(row >> tok))
                throw ConfigError("short sample row " + std::to_string(i));
            file.x(i, k) = parse_double(tok);
        }
        if (labelled) {
            if (!(row >> tok))
                throw ConfigError("missing label in row " + std::to_string(i));
            file.labels[static_cast<std::size_t>(i)] = static_cast<int>(parse_int(tok));
        }
        if (row >> tok)
            throw ConfigError("extra column in sample row " + std::to_string(i));
    }
    return file;
}

SampleFile load_samples(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open sample file '" + path + "'");
    return read_samples(in);
}

void save_samples(const std::string& path, const SampleFile& file)
{
    std::ostringstream out;
    write_samples(out, file);
    write_file_atomic(path, out.str());
}

void write_file_atomic(const std::string& path, const std::string& contents)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ConfigError("cannot write '" + tmp.string() + "'");
        out << contents;
        out.flush();
        if (!out)
            throw ConfigError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace sit
