#include "mva/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mva {

void save_image(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1))
        throw DimensionError("save_image: expected [3,H,W] or [1,H,W]");
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << (c == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                row[static_cast<std::size_t>(x) * c + ch] = static_cast<unsigned char>(
                    std::lround(std::clamp(img.at(ch, y, x), 0.0, 1.0) * 255.0));
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

namespace {

int read_pnm_int(std::istream& is) {
    int c = is.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = is.get();
        c = is.get();
    }
    int v = 0;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

}  // namespace

Tensor load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string magic(2, '\0');
    is.read(magic.data(), 2);
    int channels;
    if (magic == "P6") channels = 3;
    else if (magic == "P5") channels = 1;
    else throw std::runtime_error("unsupported image format in " + path);
    const int w = read_pnm_int(is);
    const int h = read_pnm_int(is);
    const int maxval = read_pnm_int(is);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("bad PNM header in " + path);
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("truncated image: " + path);
    Tensor img({channels, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                img.at(ch, y, x) =
                    raw[(static_cast<std::size_t>(y) * w + x) * channels + ch] / 255.0;
    return img;
}

Tensor to_gray(const Tensor& img) {
    if (img.dim(0) == 1) return img;
    Tensor out({1, img.dim(1), img.dim(2)});
    for (int y = 0; y < img.dim(1); ++y)
        for (int x = 0; x < img.dim(2); ++x)
            out.at(0, y, x) =
                (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0;
    return out;
}

Tensor downsample2(const Tensor& img) {
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    if (h % 2 || w % 2) throw DimensionError("downsample2: dims must be even");
    Tensor out({c, h / 2, w / 2});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h / 2; ++y)
            for (int x = 0; x < w / 2; ++x)
                out.at(ch, y, x) = 0.25 * (img.at(ch, 2 * y, 2 * x) +
                                           img.at(ch, 2 * y, 2 * x + 1) +
                                           img.at(ch, 2 * y + 1, 2 * x) +
                                           img.at(ch, 2 * y + 1, 2 * x + 1));
    return out;
}

Tensor resize(const Tensor& img, int out_h, int out_w) {
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < c; ++ch)
                out.at(ch, y, x) =
                    (1 - wy) * ((1 - wx) * img.at(ch, y0, x0) + wx * img.at(ch, y0, x1)) +
                    wy * ((1 - wx) * img.at(ch, y1, x0) + wx * img.at(ch, y1, x1));
        }
    }
    return out;
}

Tensor crop(const Tensor& img, int x1, int y1, int w, int h) {
    const int c = img.dim(0);
    Tensor out({c, h, w});
    for (int y = 0; y < h; ++y) {
        const int sy = y1 + y;
        if (sy < 0 || sy >= img.dim(1)) continue;
        for (int x = 0; x < w; ++x) {
            const int sx = x1 + x;
            if (sx < 0 || sx >= img.dim(2)) continue;
            for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = img.at(ch, sy, sx);
        }
    }
    return out;
}

}  // namespace mva
