#include "dsmedian/population.hpp"

#include "dsmedian/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

namespace dsmedian {

Population::Population(std::vector<double> x, std::vector<double> y, std::vector<double> z)
    : x_(std::move(x)), y_(std::move(y)), z_(std::move(z)) {
    if (x_.size() != y_.size() || y_.size() != z_.size())
        throw InvalidInput("population columns differ in length");
    if (y_.size() < 4) throw InvalidInput("population needs at least 4 units");
    for (const auto* col : {&x_, &y_, &z_}) {
        for (double v : *col) {
            if (!std::isfinite(v)) throw InvalidInput("invalid datum");
        }
    }
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] void fail(std::string_view source, std::size_t line_no, const std::string& what) {
    throw InvalidInput(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

Population parse_population_csv(std::istream& in, std::string_view source_name) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw InvalidInput(std::string(source_name) + ": empty file, expected header x,y,z");
    ++line_no;

    // column index for x, y, z
    std::array<int, 3> slot{-1, -1, -1};
    const auto header = split_fields(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = header[i];
        int which = name == "x" ? 0 : name == "y" ? 1 : name == "z" ? 2 : -1;
        if (which < 0) fail(source_name, line_no, "unexpected column '" + std::string(name) + "' (expected x,y,z)");
        if (slot[which] >= 0) fail(source_name, line_no, "duplicate column '" + std::string(name) + "'");
        slot[which] = static_cast<int>(i);
    }
    static constexpr std::array<const char*, 3> kNames{"x", "y", "z"};
    for (std::size_t k = 0; k < 3; ++k) {
        if (slot[k] < 0) fail(source_name, line_no, std::string("missing column '") + kNames[k] + "'");
    }

    std::array<std::vector<double>, 3> cols;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 3)
            fail(source_name, line_no, "expected 3 fields, found " + std::to_string(fields.size()));
        for (std::size_t k = 0; k < 3; ++k) {
            const auto text = fields[static_cast<std::size_t>(slot[k])];
            double value = 0.0;
            const auto* end = text.data() + text.size();
            const auto [ptr, ec] = std::from_chars(text.data(), end, value);
            if (ec != std::errc() || ptr != end || !std::isfinite(value))
                fail(source_name, line_no, "invalid number '" + std::string(text) + "' in column " + kNames[k]);
            cols[k].push_back(value);
        }
    }
    try {
        return Population(std::move(cols[0]), std::move(cols[1]), std::move(cols[2]));
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string(source_name) + ": " + e.what());
    }
}

Population read_population_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return parse_population_csv(in, path.string());
}

namespace {

PopulationSummary census_part(const Population& pop) {
    PopulationSummary s;
    s.N = pop.size();
    s.median_x = sample_median(pop.x());
    s.median_y = sample_median(pop.y());
    s.median_z = sample_median(pop.z());
    s.pm_xy = proportion_matrix(pop.x(), pop.y(), s.median_x, s.median_y);
    s.pm_xz = proportion_matrix(pop.x(), pop.z(), s.median_x, s.median_z);
    s.pm_yz = proportion_matrix(pop.y(), pop.z(), s.median_y, s.median_z);
    return s;
}

double density_at_median(std::span<const double> values, double median) {
    double f = 0.0;
    try {
        f = kde_at(values, median).value;
    } catch (const InvalidInput&) {
        throw DegenerateModel("zero density at median");
    }
    if (!(f > 0.0)) throw DegenerateModel("zero density at median");
    return f;
}

}  // namespace

PopulationSummary population_summary(const Population& pop) {
    auto s = census_part(pop);
    s.density_x = density_at_median(pop.x(), s.median_x);
    s.density_y = density_at_median(pop.y(), s.median_y);
    s.density_z = density_at_median(pop.z(), s.median_z);
    s.density_source = DensitySource::CensusKde;
    return s;
}

PopulationSummary population_summary(const Population& pop, const MarginalDensities& known) {
    if (!(known.x > 0.0 && known.y > 0.0 && known.z > 0.0) || !std::isfinite(known.x) ||
        !std::isfinite(known.y) || !std::isfinite(known.z))
        throw DegenerateModel("zero density at median");
    auto s = census_part(pop);
    s.density_x = known.x;
    s.density_y = known.y;
    s.density_z = known.z;
    s.density_source = DensitySource::Analytic;
    return s;
}

}  // namespace dsmedian
