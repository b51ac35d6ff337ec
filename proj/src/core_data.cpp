#include "wsindy/core_data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wsindy/errors.hpp"
#include "wsindy/rng.hpp"

namespace wsindy {

namespace {

constexpr char kMagic[8] = {'W', 'S', 'D', 'A', 'T', 'A', '1', '\0'};

std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::runtime_error("cannot format number");
    return {buf, end};
}

double parse_double(const std::string& s) {
    double x = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || end != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
    return x;
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t x = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || end != s.data() + s.size()) throw FormatError("bad integer '" + s + "'");
    return x;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(item);
    return out;
}

template <typename T>
T to_little_endian(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

}  // namespace

std::size_t Grid::num_points() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<std::size_t> Grid::strides() const {
    std::vector<std::size_t> s(counts.size(), 1);
    for (std::size_t q = counts.size(); q-- > 1;) s[q - 1] = s[q] * counts[q];
    return s;
}

Grid make_grid(const std::vector<std::pair<double, double>>& extents, const std::vector<std::size_t>& counts) {
    if (extents.empty() || extents.size() != counts.size())
        throw std::invalid_argument("make_grid: extents and counts must have equal nonzero length");
    Grid g{extents, counts, {}};
    for (std::size_t q = 0; q < counts.size(); ++q) {
        if (counts[q] < 2) throw std::invalid_argument("make_grid: every axis needs at least 2 points");
        const auto [a, b] = extents[q];
        if (!(b > a) || !std::isfinite(a) || !std::isfinite(b))
            throw std::invalid_argument("make_grid: degenerate extent");
        g.resolution.push_back((b - a) / static_cast<double>(counts[q] - 1));
    }
    return g;
}

void Dataset::validate() const {
    if (state_dim < 1) throw std::invalid_argument("dataset: state_dim must be >= 1");
    if (values.size() != num_points() * state_dim)
        throw std::invalid_argument("dataset: values do not match grid counts x state_dim");
    if (kind == DataKind::clean && sigma != 0.0) throw std::invalid_argument("dataset: clean data must have sigma = 0");
}

const char* to_string(DataKind kind) noexcept { return kind == DataKind::clean ? "clean" : "noisy"; }

Dataset subsample(const Dataset& data, const std::vector<std::size_t>& factors) {
    const Grid& g = data.grid;
    if (factors.size() != g.dims()) throw std::invalid_argument("subsample: one factor per axis required");
    std::vector<std::pair<double, double>> extents;
    std::vector<std::size_t> counts;
    for (std::size_t q = 0; q < g.dims(); ++q) {
        if (factors[q] < 1) throw std::invalid_argument("subsample: factor must be >= 1");
        const std::size_t n = (g.counts[q] - 1) / factors[q] + 1;
        if (n < 2) throw std::invalid_argument("subsample: factor leaves fewer than 2 points");
        counts.push_back(n);
        const double a = g.extents[q].first;
        const double b = factors[q] == 1 ? g.extents[q].second : g.coordinate(q, (n - 1) * factors[q]);
        extents.emplace_back(a, b);
    }
    Dataset out = data;
    out.grid = make_grid(extents, counts);
    // Keep the exact fine-grid spacing times the factor.
    for (std::size_t q = 0; q < g.dims(); ++q)
        out.grid.resolution[q] = g.resolution[q] * static_cast<double>(factors[q]);

    const auto src_strides = g.strides();
    const std::size_t n_out = out.grid.num_points();
    const std::size_t sd = data.state_dim;
    out.values.assign(n_out * sd, 0.0);
    std::vector<std::size_t> idx(g.dims(), 0);
    for (std::size_t p = 0; p < n_out; ++p) {
        std::size_t src = 0;
        for (std::size_t q = 0; q < g.dims(); ++q) src += idx[q] * factors[q] * src_strides[q];
        for (std::size_t c = 0; c < sd; ++c) out.values[p * sd + c] = data.values[src * sd + c];
        for (std::size_t q = g.dims(); q-- > 0;) {
            if (++idx[q] < counts[q]) break;
            idx[q] = 0;
        }
    }
    return out;
}

double stdev_all(const Dataset& data) {
    const auto& v = data.values;
    if (v.empty()) throw std::invalid_argument("stdev_all: empty dataset");
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / n);
}

Dataset add_noise(const Dataset& data, const NoiseSpec& spec) {
    if (!(spec.level >= 0.0)) throw std::invalid_argument("add_noise: negative noise level");
    if (data.kind != DataKind::clean) throw std::invalid_argument("add_noise: dataset is already noisy");
    double sigma = spec.level;
    Dataset out = data;
    if (spec.level_mode == NoiseLevelMode::noise_ratio) {
        const double ref = stdev_all(data);
        sigma = spec.level * ref;
        out.metadata["sigma_nr"] = format_double(spec.level);
        out.metadata["sigma_nr_reference"] = "corrupted_resolution";
        out.metadata["clean_stdev"] = format_double(ref);
    }
    out.kind = DataKind::noisy;
    out.sigma = sigma;
    out.seed = spec.seed;
    out.metadata["noise"] = spec.distribution == NoiseDistribution::gaussian ? "gaussian" : "uniform";
    if (sigma == 0.0) return out;

    const CounterRng rng(spec.seed);
    if (spec.distribution == NoiseDistribution::gaussian) {
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += sigma * rng.normal(i);
    } else {
        const double half_width = sigma * std::sqrt(3.0);
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += half_width * (2.0 * rng.uniform(i) - 1.0);
    }
    return out;
}

std::string serialize_dataset(const Dataset& data) {
    data.validate();
    std::ostringstream h;
    const Grid& g = data.grid;
    h << "dims=" << g.dims() << '\n';
    h << "counts=";
    for (std::size_t q = 0; q < g.dims(); ++q) h << (q ? "," : "") << g.counts[q];
    h << "\nextents=";
    for (std::size_t q = 0; q < g.dims(); ++q)
        h << (q ? "," : "") << format_double(g.extents[q].first) << ':' << format_double(g.extents[q].second);
    h << "\nresolution=";
    for (std::size_t q = 0; q < g.dims(); ++q) h << (q ? "," : "") << format_double(g.resolution[q]);
    h << "\nstate_dim=" << data.state_dim << '\n';
    h << "kind=" << to_string(data.kind) << '\n';
    h << "sigma=" << format_double(data.sigma) << '\n';
    h << "seed=" << (data.seed ? std::to_string(*data.seed) : std::string()) << '\n';
    for (const auto& [k, v] : data.metadata) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw std::invalid_argument("dataset metadata may not contain '=' in keys or newlines");
        h << "meta." << k << '=' << v << '\n';
    }
    const std::string header = h.str();

    std::string out(kMagic, sizeof kMagic);
    const auto len = to_little_endian(static_cast<std::uint32_t>(header.size()));
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    out += header;
    const std::size_t off = out.size();
    out.resize(off + data.values.size() * sizeof(double));
    for (std::size_t i = 0; i < data.values.size(); ++i) {
        const double v = to_little_endian(data.values[i]);
        std::memcpy(out.data() + off + i * sizeof(double), &v, sizeof v);
    }
    return out;
}

Dataset deserialize_dataset(const std::string& bytes) {
    if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw FormatError("not a WSD1 dataset (bad magic)");
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + sizeof kMagic, sizeof len);
    len = to_little_endian(len);
    const std::size_t header_off = sizeof kMagic + 4;
    if (bytes.size() < header_off + len) throw FormatError("truncated header");
    const std::string header = bytes.substr(header_off, len);

    std::map<std::string, std::string> kv;
    for (const auto& line : split(header, '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("header line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("missing header key '" + key + "'");
        return it->second;
    };

    const auto dims = parse_u64(need("dims"));
    std::vector<std::size_t> counts;
    for (const auto& c : split(need("counts"), ',')) counts.push_back(parse_u64(c));
    std::vector<std::pair<double, double>> extents;
    for (const auto& e : split(need("extents"), ',')) {
        const auto parts = split(e, ':');
        if (parts.size() != 2) throw FormatError("bad extent '" + e + "'");
        extents.emplace_back(parse_double(parts[0]), parse_double(parts[1]));
    }
    if (counts.size() != dims || extents.size() != dims) throw FormatError("dims disagree with counts/extents");

    Dataset d;
    try {
        d.grid = make_grid(extents, counts);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    if (auto it = kv.find("resolution"); it != kv.end()) {
        const auto parts = split(it->second, ',');
        if (parts.size() != dims) throw FormatError("resolution length mismatch");
        for (std::size_t q = 0; q < dims; ++q) d.grid.resolution[q] = parse_double(parts[q]);
    }
    d.state_dim = parse_u64(need("state_dim"));
    if (d.state_dim < 1) throw FormatError("state_dim must be >= 1");
    const auto& kind = need("kind");
    if (kind == "clean")
        d.kind = DataKind::clean;
    else if (kind == "noisy")
        d.kind = DataKind::noisy;
    else
        throw FormatError("bad kind '" + kind + "'");
    d.sigma = parse_double(need("sigma"));
    if (const auto& s = need("seed"); !s.empty()) d.seed = parse_u64(s);
    for (const auto& [k, v] : kv)
        if (k.rfind("meta.", 0) == 0) d.metadata[k.substr(5)] = v;

    const std::size_t n = d.grid.num_points() * d.state_dim;
    const std::size_t payload = bytes.size() - header_off - len;
    if (payload != n * sizeof(double))
        throw FormatError("payload holds " + std::to_string(payload) + " bytes, header implies " +
                          std::to_string(n * sizeof(double)));
    d.values.resize(n);
    const char* p = bytes.data() + header_off + len;
    for (std::size_t i = 0; i < n; ++i) {
        double v;
        std::memcpy(&v, p + i * sizeof(double), sizeof v);
        d.values[i] = to_little_endian(v);
    }
    if (d.kind == DataKind::clean && d.sigma != 0.0) throw FormatError("clean dataset with nonzero sigma");
    return d;
}

void write_dataset(const Dataset& data, const std::string& path) {
    const std::string bytes = serialize_dataset(data);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_dataset(ss.str());
}

}  // namespace wsindy
