#include "hgdomain/errors.hpp"
#include "hgdomain/features.hpp"

#include <png.h>

namespace hgdomain {

Image load_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw DataError("cannot read PNG '" + path.string() + "': " + png.message);
    }

    Image out;
    const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
    png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    out.width = static_cast<int>(png.width);
    out.height = static_cast<int>(png.height);
    out.channels = gray ? 1 : 3;
    out.pixels.resize(PNG_IMAGE_SIZE(png));

    // Flatten any alpha against black so transparent background reads as empty tissue.
    png_color background{0, 0, 0};
    if (!png_image_finish_read(&png, &background, out.pixels.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
    }
    return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3) {
        throw std::invalid_argument("write_png: only 1 or 3 channels are supported");
    }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
        throw DataError("cannot write PNG '" + path.string() + "': " + png.message);
    }
}

}
