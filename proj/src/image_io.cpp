#include "gem/image_io.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace gem::io {
namespace {

cv::Mat to_mat(const Image& image) {
    cv::Mat bgr(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3);
    for (int64_t y = 0; y < image.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
        for (int64_t x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
                row[x][2 - c] = static_cast<uint8_t>(v * 255.0f + 0.5f);
            }
        }
    }
    return bgr;
}

Image from_mat(const cv::Mat& bgr) {
    Image image(bgr.rows, bgr.cols);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(y, x, c) = static_cast<float>(row[x][2 - c]) / 255.0f;
            }
        }
    }
    return image;
}

cv::Mat to_mat(const BinaryMask& mask) {
    cv::Mat gray(static_cast<int>(mask.height), static_cast<int>(mask.width), CV_8UC1);
    for (int64_t i = 0; i < mask.size(); ++i) {
        gray.data[i] = mask.data[static_cast<size_t>(i)] ? 255 : 0;
    }
    return gray;
}

BinaryMask from_gray(const cv::Mat& gray) {
    BinaryMask mask(gray.rows, gray.cols);
    for (int y = 0; y < gray.rows; ++y) {
        const auto* row = gray.ptr<uint8_t>(y);
        for (int x = 0; x < gray.cols; ++x) {
            mask.at(y, x) = row[x] >= 128 ? 1 : 0;
        }
    }
    return mask;
}

void write_or_throw(const std::filesystem::path& path, const cv::Mat& mat) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw IoError("failed to write " + path.string());
    }
}

cv::Mat read_or_throw(const std::filesystem::path& path, int flags) {
    if (!std::filesystem::exists(path)) {
        throw IoError("no such file: " + path.string());
    }
    cv::Mat mat = cv::imread(path.string(), flags);
    if (mat.empty()) {
        throw IoError("failed to decode " + path.string());
    }
    return mat;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    return from_mat(read_or_throw(path, cv::IMREAD_COLOR));
}

void write_image(const std::filesystem::path& path, const Image& image) {
    write_or_throw(path, to_mat(image));
}

Plane<float> read_mask_values(const std::filesystem::path& path) {
    cv::Mat gray = read_or_throw(path, cv::IMREAD_GRAYSCALE);
    Plane<float> values(gray.rows, gray.cols);
    for (int y = 0; y < gray.rows; ++y) {
        const auto* row = gray.ptr<uint8_t>(y);
        for (int x = 0; x < gray.cols; ++x) {
            values.at(y, x) = static_cast<float>(row[x]) / 255.0f;
        }
    }
    return values;
}

BinaryMask read_mask(const std::filesystem::path& path) {
    return from_gray(read_or_throw(path, cv::IMREAD_GRAYSCALE));
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    write_or_throw(path, to_mat(mask));
}

void write_probability(const std::filesystem::path& path, const ProbabilityMap& prob) {
    cv::Mat gray(static_cast<int>(prob.height), static_cast<int>(prob.width), CV_8UC1);
    for (int64_t i = 0; i < prob.size(); ++i) {
        gray.data[i] = static_cast<uint8_t>(std::clamp(prob.data[static_cast<size_t>(i)], 0.0f, 1.0f) * 255.0f + 0.5f);
    }
    write_or_throw(path, gray);
}

std::vector<uint8_t> encode_png(const Image& image) {
    std::vector<uint8_t> bytes;
    cv::imencode(".png", to_mat(image), bytes);
    return bytes;
}

std::vector<uint8_t> encode_png(const BinaryMask& mask) {
    std::vector<uint8_t> bytes;
    cv::imencode(".png", to_mat(mask), bytes);
    return bytes;
}

Image decode_png_image(const std::vector<uint8_t>& bytes) {
    cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_COLOR);
    if (mat.empty()) {
        throw IoError("failed to decode PNG image payload");
    }
    return from_mat(mat);
}

BinaryMask decode_png_mask(const std::vector<uint8_t>& bytes) {
    cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_GRAYSCALE);
    if (mat.empty()) {
        throw IoError("failed to decode PNG mask payload");
    }
    return from_gray(mat);
}

Image resize_bilinear(const Image& image, int64_t height, int64_t width) {
    if (image.height == height && image.width == width) {
        return image;
    }
    cv::Mat src(static_cast<int>(image.height), static_cast<int>(image.width), CV_32FC3,
                const_cast<float*>(image.data.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
    Image out(height, width);
    std::copy(dst.ptr<float>(), dst.ptr<float>() + out.data.size(), out.data.begin());
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int64_t height, int64_t width) {
    if (mask.height == height && mask.width == width) {
        return mask;
    }
    cv::Mat src(static_cast<int>(mask.height), static_cast<int>(mask.width), CV_8UC1,
                const_cast<uint8_t*>(mask.data.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_NEAREST);
    BinaryMask out(height, width);
    std::copy(dst.data, dst.data + out.size(), out.data.begin());
    return out;
}

ProbabilityMap resize_bilinear(const ProbabilityMap& prob, int64_t height, int64_t width) {
    if (prob.height == height && prob.width == width) {
        return prob;
    }
    cv::Mat src(static_cast<int>(prob.height), static_cast<int>(prob.width), CV_32FC1,
                const_cast<float*>(prob.data.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
    ProbabilityMap out(height, width);
    std::copy(dst.ptr<float>(), dst.ptr<float>() + out.size(), out.data.begin());
    return out;
}

Image overlay(const Image& image, const BinaryMask& mask, float alpha) {
    require_same_shape(Plane<uint8_t>(image.height, image.width), mask, "overlay");
    Image out = image;
    for (int64_t y = 0; y < image.height; ++y) {
        for (int64_t x = 0; x < image.width; ++x) {
            if (!mask.at(y, x)) {
                continue;
            }
            out.at(y, x, 0) = (1.0f - alpha) * image.at(y, x, 0) + alpha;
            out.at(y, x, 1) = (1.0f - alpha) * image.at(y, x, 1);
            out.at(y, x, 2) = (1.0f - alpha) * image.at(y, x, 2);
        }
    }
    return out;
}

}  // namespace gem::io
