#include "kga/weights_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kga/errors.hpp"

namespace kga {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_weights(const ParamStore& store, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "KGAW1\n";
    for (const auto& name : store.names()) {
        const Tensor& t = store.get(name);
        check_finite(t, "tensor " + name + " before serialization");
        out << name << ' ' << t.ndim();
        for (std::size_t d : t.shape) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            if (i) out << ' ';
            out << format_double(t.values[i]);
        }
        out << '\n';
    }
    out << "frozen";
    for (const auto& name : store.names()) {
        if (store.is_frozen(name)) out << ' ' << name;
    }
    out << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

ParamStore read_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&](std::string& dst) {
        if (!std::getline(in, dst)) {
            throw ParseError(path.string() + ": unexpected end of file at line " +
                             std::to_string(line_no + 1));
        }
        ++line_no;
    };

    next_line(line);
    if (line != "KGAW1") throw ParseError(path.string() + ": line 1: bad magic, expected KGAW1");

    ParamStore store;
    while (true) {
        next_line(line);
        std::istringstream header(line);
        std::string name;
        if (!(header >> name)) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": empty header");
        }
        if (name == "frozen") {
            std::string frozen_name;
            while (header >> frozen_name) store.set_frozen(frozen_name, true);
            break;
        }
        std::size_t ndim = 0;
        if (!(header >> ndim) || ndim == 0) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": bad rank for tensor " + name);
        }
        std::vector<std::size_t> shape(ndim);
        std::size_t count = 1;
        for (std::size_t d = 0; d < ndim; ++d) {
            if (!(header >> shape[d]) || shape[d] == 0) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": bad dimension for tensor " + name);
            }
            count *= shape[d];
        }
        std::string trailing;
        if (header >> trailing) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": trailing tokens in header of " + name);
        }

        next_line(line);
        std::istringstream body(line);
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) {
            if (!(body >> values[i])) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": expected " + std::to_string(count) + " values for " + name);
            }
        }
        if (body >> trailing) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": trailing values for " + name);
        }
        store.add(name, Tensor(std::move(shape), std::move(values)));
    }
    for (const auto& name : store.names()) {
        check_finite(store.get(name), "tensor " + name + " from " + path.string());
    }
    return store;
}

}  // namespace kga
