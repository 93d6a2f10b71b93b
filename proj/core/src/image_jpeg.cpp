#include <csetjmp>
#include <cstdio>

#include <jpeglib.h>

#include "ddcnn/errors.hpp"
#include "ddcnn/image.hpp"

namespace ddcnn {

namespace {

struct JpegErrorContext {
    jpeg_error_mgr mgr;
    jmp_buf jump;
    char message[JMSG_LENGTH_MAX] = {};
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* ctx = reinterpret_cast<JpegErrorContext*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, ctx->message);
    std::longjmp(ctx->jump, 1);
}

struct FileHandle {
    std::FILE* fp = nullptr;
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
};

} // namespace

ImageBuffer decode_jpeg(const std::filesystem::path& path) {
    FileHandle file;
    file.fp = std::fopen(path.string().c_str(), "rb");
    if (!file.fp) throw IoError("cannot open image '" + path.string() + "'");

    jpeg_decompress_struct cinfo;
    JpegErrorContext err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;

    ImageBuffer image;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("corrupt JPEG '" + path.string() + "': " + err.message);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    image.channels = cinfo.output_components;
    image.height = static_cast<int>(cinfo.output_height);
    image.width = static_cast<int>(cinfo.output_width);
    image.pixels.resize(image.sample_count());

    const std::size_t row_stride =
        static_cast<std::size_t>(image.width) * image.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = image.pixels.data() + cinfo.output_scanline * row_stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return image;
}

} // namespace ddcnn
