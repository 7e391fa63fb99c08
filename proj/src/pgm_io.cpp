#include "lgeseg/pgm_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lgeseg {

namespace {

// Reads the next whitespace-delimited token, skipping '#' comments.
bool next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    do {
        tok.push_back(static_cast<char>(c));
    } while ((c = in.get()) != EOF && !std::isspace(c) && c != '#');
    if (c == '#') in.unget();
    return true;
}

long parse_long(const std::string& tok, const std::string& what, const std::string& path) {
    size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != tok.size())
        throw std::runtime_error("PGM '" + path + "': malformed " + what + " ('" + tok + "')");
    return v;
}

void write_atomic(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

std::string meta_path_for(const std::string& image_path) {
    std::filesystem::path p(image_path);
    p.replace_extension(".meta");
    return p.string();
}

Image2D load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("PGM '" + path + "': cannot open file");

    std::string tok;
    if (!next_token(in, tok))
        throw std::runtime_error("PGM '" + path + "': empty file");
    const bool ascii = (tok == "P2");
    if (!ascii && tok != "P5")
        throw std::runtime_error("PGM '" + path + "': bad magic number '" + tok + "' (expected P2 or P5)");

    std::string wt, ht, mt;
    if (!next_token(in, wt) || !next_token(in, ht) || !next_token(in, mt))
        throw std::runtime_error("PGM '" + path + "': truncated header");
    const long w = parse_long(wt, "width", path);
    const long h = parse_long(ht, "height", path);
    const long maxval = parse_long(mt, "maxval", path);
    if (w <= 0 || h <= 0)
        throw std::runtime_error("PGM '" + path + "': non-positive dimensions");
    if (maxval <= 0 || maxval > 65535)
        throw std::runtime_error("PGM '" + path + "': maxval out of range");

    Image2D img(static_cast<int>(w), static_cast<int>(h));
    const size_t n = img.pixel_count();

    if (ascii) {
        for (size_t k = 0; k < n; ++k) {
            if (!next_token(in, tok))
                throw std::runtime_error("PGM '" + path + "': truncated payload");
            const long v = parse_long(tok, "sample", path);
            if (v < 0 || v > maxval)
                throw std::runtime_error("PGM '" + path + "': sample out of range");
            img.data[k] = static_cast<double>(v);
        }
    } else {
        const int bytes = maxval > 255 ? 2 : 1;
        std::string buf(n * bytes, '\0');
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (static_cast<size_t>(in.gcount()) != buf.size())
            throw std::runtime_error("PGM '" + path + "': truncated payload");
        const auto* bytes_ptr = reinterpret_cast<const unsigned char*>(buf.data());
        for (size_t k = 0; k < n; ++k) {
            long v;
            if (bytes == 1) {
                v = bytes_ptr[k];
            } else {
                v = (static_cast<long>(bytes_ptr[2 * k]) << 8) | bytes_ptr[2 * k + 1];
            }
            if (v > maxval)
                throw std::runtime_error("PGM '" + path + "': sample out of range");
            img.data[k] = static_cast<double>(v);
        }
    }

    // Sidecar spacings; absent file means unit spacing.
    const std::string mp = meta_path_for(path);
    std::ifstream meta(mp);
    if (meta) {
        std::string line;
        while (std::getline(meta, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("meta '" + mp + "': malformed line '" + line + "'");
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 1);
            size_t pos = 0;
            double s = 0.0;
            try {
                s = std::stod(val, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != val.size() || s <= 0.0)
                throw std::runtime_error("meta '" + mp + "': bad value for '" + key + "'");
            if (key == "spacing_x") img.spacing_x = s;
            else if (key == "spacing_y") img.spacing_y = s;
            else throw std::runtime_error("meta '" + mp + "': unknown key '" + key + "'");
        }
    }
    img.validate();
    return img;
}

void save_pgm(const Image2D& img, const std::string& path, int maxval, bool ascii) {
    img.validate();
    if (maxval <= 0 || maxval > 65535)
        throw std::invalid_argument("save_pgm: maxval out of range");

    std::ostringstream out;
    out << (ascii ? "P2" : "P5") << "\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    if (ascii) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                long v = std::lround(img.at(x, y));
                v = std::clamp<long>(v, 0, maxval);
                out << v << (x + 1 == img.width ? "\n" : " ");
            }
        }
    } else {
        const int bytes = maxval > 255 ? 2 : 1;
        std::string payload;
        payload.reserve(img.pixel_count() * bytes);
        for (double d : img.data) {
            long v = std::lround(d);
            v = std::clamp<long>(v, 0, maxval);
            if (bytes == 2) payload.push_back(static_cast<char>((v >> 8) & 0xff));
            payload.push_back(static_cast<char>(v & 0xff));
        }
        out << payload;
    }
    write_atomic(path, out.str());

    char meta[128];
    std::snprintf(meta, sizeof(meta), "spacing_x=%.17g\nspacing_y=%.17g\n", img.spacing_x, img.spacing_y);
    write_atomic(meta_path_for(path), meta);
}

} // namespace lgeseg
