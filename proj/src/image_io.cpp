#include "dbini/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace dbini {

namespace {

void write_pfm_impl(const std::filesystem::path& path, const char* magic, int w, int h,
                    int channels, const double* data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << magic << "\n" << w << " " << h << "\n" << "-1.0" << "\n";
    std::vector<float> row(static_cast<std::size_t>(w) * channels);
    for (int v = h - 1; v >= 0; --v) {  // PFM rows run bottom-up
        const double* src = data + static_cast<std::size_t>(v) * w * channels;
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write: " + path.string());
}

struct PfmHeader {
    bool color = false;
    int w = 0, h = 0;
    bool little_endian = true;
};

PfmHeader read_pfm_header(std::ifstream& in, const std::filesystem::path& path) {
    auto next_token = [&](std::string& tok) {
        tok.clear();
        int c;
        while ((c = in.get()) != EOF && std::isspace(c)) {
        }
        if (c == EOF) throw IoError("truncated PFM header: " + path.string());
        do {
            tok.push_back(static_cast<char>(c));
        } while ((c = in.get()) != EOF && !std::isspace(c));
        // the whitespace byte after the scale token doubles as the data separator
    };
    PfmHeader hd;
    std::string tok;
    next_token(tok);
    if (tok == "PF")
        hd.color = true;
    else if (tok != "Pf")
        throw IoError("not a PFM file: " + path.string());
    next_token(tok);
    hd.w = std::stoi(tok);
    next_token(tok);
    hd.h = std::stoi(tok);
    next_token(tok);
    hd.little_endian = std::stod(tok) < 0.0;
    if (hd.w < 1 || hd.h < 1) throw IoError("bad PFM dimensions: " + path.string());
    return hd;
}

void byteswap_floats(float* p, std::size_t count) {
    auto* b = reinterpret_cast<unsigned char*>(p);
    for (std::size_t i = 0; i < count; ++i, b += 4) {
        std::swap(b[0], b[3]);
        std::swap(b[1], b[2]);
    }
}

std::vector<double> read_pfm_impl(const std::filesystem::path& path, int channels_expected,
                                  int& w, int& h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    PfmHeader hd = read_pfm_header(in, path);
    const int channels = hd.color ? 3 : 1;
    if (channels != channels_expected)
        throw IoError("PFM channel count mismatch: " + path.string());
    w = hd.w;
    h = hd.h;
    std::vector<double> data(static_cast<std::size_t>(w) * h * channels);
    std::vector<float> row(static_cast<std::size_t>(w) * channels);
    for (int v = h - 1; v >= 0; --v) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw IoError("truncated PFM data: " + path.string());
        if (!hd.little_endian) byteswap_floats(row.data(), row.size());
        double* dst = data.data() + static_cast<std::size_t>(v) * w * channels;
        for (std::size_t i = 0; i < row.size(); ++i) dst[i] = row[i];
    }
    return data;
}

struct PngReader {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriter {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void png_open_read(PngReader& r, const std::filesystem::path& path) {
    r.fp = std::fopen(path.string().c_str(), "rb");
    if (!r.fp) throw IoError("cannot open: " + path.string());
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (!r.png || !r.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("libpng read failure: " + path.string());
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);
}

void png_open_write(PngWriter& w, const std::filesystem::path& path) {
    w.fp = std::fopen(path.string().c_str(), "wb");
    if (!w.fp) throw IoError("cannot open for writing: " + path.string());
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    w.info = png_create_info_struct(w.png);
    if (!w.png || !w.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(w.png))) throw IoError("libpng write failure: " + path.string());
    png_init_io(w.png, w.fp);
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const ScalarField2D& field) {
    write_pfm_impl(path, "Pf", field.shape.width, field.shape.height, 1,
                   field.values.data());
}

ScalarField2D read_pfm(const std::filesystem::path& path, double pitch) {
    int w = 0, h = 0;
    auto data = read_pfm_impl(path, 1, w, h);
    ScalarField2D f(GridShape(w, h, pitch), 0.0);
    f.values = std::move(data);
    return f;
}

void write_pfm3(const std::filesystem::path& path, const VectorField2D& field) {
    std::vector<double> flat(static_cast<std::size_t>(field.shape.pixels()) * 3);
    for (int p = 0; p < field.shape.pixels(); ++p) {
        flat[3 * p + 0] = field.values[p].x;
        flat[3 * p + 1] = field.values[p].y;
        flat[3 * p + 2] = field.values[p].z;
    }
    write_pfm_impl(path, "PF", field.shape.width, field.shape.height, 3, flat.data());
}

VectorField2D read_pfm3(const std::filesystem::path& path, double pitch) {
    int w = 0, h = 0;
    auto data = read_pfm_impl(path, 3, w, h);
    VectorField2D f(GridShape(w, h, pitch));
    for (int p = 0; p < f.shape.pixels(); ++p)
        f.values[p] = {data[3 * p + 0], data[3 * p + 1], data[3 * p + 2]};
    return f;
}

void write_mask_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& values) {
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw ShapeMismatch("write_mask_png: size mismatch");
    PngWriter w;
    png_open_write(w, path);
    png_set_IHDR(w.png, w.info, width, height, 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<png_byte> row(width);
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u)
            row[u] = values[static_cast<std::size_t>(v) * width + u] ? 255 : 0;
        png_write_row(w.png, row.data());
    }
    png_write_end(w.png, nullptr);
}

MaskImage read_mask_png(const std::filesystem::path& path) {
    PngReader r;
    png_open_read(r, path);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 8)
        throw IoError("mask must be 8-bit grayscale PNG: " + path.string());
    MaskImage m;
    m.width = static_cast<int>(png_get_image_width(r.png, r.info));
    m.height = static_cast<int>(png_get_image_height(r.png, r.info));
    m.values.resize(static_cast<std::size_t>(m.width) * m.height);
    std::vector<png_byte> row(m.width);
    for (int v = 0; v < m.height; ++v) {
        png_read_row(r.png, row.data(), nullptr);
        for (int u = 0; u < m.width; ++u)
            m.values[static_cast<std::size_t>(v) * m.width + u] = row[u] > 127 ? 1 : 0;
    }
    return m;
}

void write_normal_png16(const std::filesystem::path& path, const VectorField2D& field) {
    PngWriter w;
    png_open_write(w, path);
    const int width = field.shape.width, height = field.shape.height;
    png_set_IHDR(w.png, w.info, width, height, 16, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_set_swap(w.png);  // samples are big-endian on the wire
    std::vector<std::uint16_t> row(static_cast<std::size_t>(width) * 3);
    auto encode = [](double x) {
        const double c = (x + 1.0) * 0.5 * 65535.0;
        return static_cast<std::uint16_t>(std::lround(std::min(65535.0, std::max(0.0, c))));
    };
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            const Vec3& n = field.at(u, v);
            row[3 * u + 0] = encode(n.x);
            row[3 * u + 1] = encode(n.y);
            row[3 * u + 2] = encode(n.z);
        }
        png_write_row(w.png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(w.png, nullptr);
}

VectorField2D read_normal_png16(const std::filesystem::path& path, double pitch) {
    PngReader r;
    png_open_read(r, path);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_RGB ||
        png_get_bit_depth(r.png, r.info) != 16)
        throw IoError("normal map must be 16-bit RGB PNG: " + path.string());
    png_set_swap(r.png);
    const int width = static_cast<int>(png_get_image_width(r.png, r.info));
    const int height = static_cast<int>(png_get_image_height(r.png, r.info));
    VectorField2D f(GridShape(width, height, pitch));
    std::vector<std::uint16_t> row(static_cast<std::size_t>(width) * 3);
    for (int v = 0; v < height; ++v) {
        png_read_row(r.png, reinterpret_cast<png_bytep>(row.data()), nullptr);
        for (int u = 0; u < width; ++u) {
            Vec3 n{2.0 * row[3 * u + 0] / 65535.0 - 1.0,
                   2.0 * row[3 * u + 1] / 65535.0 - 1.0,
                   2.0 * row[3 * u + 2] / 65535.0 - 1.0};
            const double len = n.norm();
            f.at(u, v) = len > 0.0 ? n * (1.0 / len) : n;
        }
    }
    return f;
}

}  // namespace dbini
