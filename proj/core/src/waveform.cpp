#include "rcmodal/waveform.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "rcmodal/error.hpp"

namespace rcmodal {

void Waveform::validate() const {
    if (times.size() != values.size()) {
        throw Error(ErrorKind::InvalidArgument, "waveform times/values length mismatch");
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) {
            throw Error(ErrorKind::InvalidArgument, "waveform times must be strictly increasing");
        }
    }
}

std::vector<double> uniform_grid(double t_end, double dt) {
    if (!(t_end > 0.0) || !(dt > 0.0) || dt > t_end) {
        throw Error(ErrorKind::InvalidArgument, "uniform_grid requires 0 < dt <= t_end");
    }
    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
    return t;
}

void write_waveform_csv(const Waveform& w, const std::filesystem::path& path) {
    w.validate();
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "time_s,voltage_v\n";
    for (std::size_t k = 0; k < w.size(); ++k) {
        out << w.times[k] << ',' << w.values[k] << '\n';
    }
}

Waveform read_waveform_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "time_s,voltage_v") {
        throw Error(ErrorKind::CorruptFile, "missing waveform CSV header in " + path.string());
    }
    Waveform w;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::CorruptFile, "bad CSV row: " + line);
        w.times.push_back(std::stod(line.substr(0, comma)));
        w.values.push_back(std::stod(line.substr(comma + 1)));
    }
    w.validate();
    return w;
}

}  // namespace rcmodal
