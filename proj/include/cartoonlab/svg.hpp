#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cartoonlab/latent.hpp"
#include "cartoonlab/mixture.hpp"

namespace cartoonlab {

// Hand-emitted SVG scatter of a 2-D run: dataset samples in grey, mixture
// means class-colored, final samples marked, optional trajectory polyline.
// No drawing library; the output is a handful of <circle> and <polyline>
// elements.
class SvgScatter {
public:
    SvgScatter(double width = 640, double height = 640) : width_(width), height_(height) {}

    void add_dataset_samples(const std::vector<Latent>& samples) {
        for (const auto& s : samples) add_point(s, "#b0b0b0", 2.0);
    }

    void add_mixture_means(const LabeledMixture& mix) {
        for (const auto& cls : mix.classes)
            for (const auto& comp : cls.components)
                add_point(comp.mean, class_color(cls.label), 5.0);
    }

    void add_final_sample(const Latent& x, const std::string& color = "#d62728") {
        add_marker(x, color);
    }

    void add_trajectory(const std::vector<Latent>& path) { polylines_.push_back(path); }

    std::string str() const {
        double min_x = -1.0, max_x = 1.0, min_y = -1.0, max_y = 1.0;
        bool first = true;
        auto grow = [&](const Latent& p) {
            if (first) {
                min_x = max_x = p[0];
                min_y = max_y = p[1];
                first = false;
            } else {
                min_x = std::min(min_x, p[0]);
                max_x = std::max(max_x, p[0]);
                min_y = std::min(min_y, p[1]);
                max_y = std::max(max_y, p[1]);
            }
        };
        for (const auto& [p, c, r] : points_) grow(p);
        for (const auto& [p, c] : markers_) grow(p);
        for (const auto& line : polylines_)
            for (const auto& p : line) grow(p);
        double pad = 0.1 * std::max(max_x - min_x, max_y - min_y);
        if (pad <= 0.0) pad = 1.0;
        min_x -= pad;
        max_x += pad;
        min_y -= pad;
        max_y += pad;

        auto sx = [&](double x) { return (x - min_x) / (max_x - min_x) * width_; };
        auto sy = [&](double y) { return height_ - (y - min_y) / (max_y - min_y) * height_; };

        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
            << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n";
        out << "  <rect width=\"" << width_ << "\" height=\"" << height_
            << "\" fill=\"white\"/>\n";
        for (const auto& line : polylines_) {
            out << "  <polyline fill=\"none\" stroke=\"#888888\" stroke-width=\"1\" points=\"";
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (i) out << ' ';
                out << sx(line[i][0]) << ',' << sy(line[i][1]);
            }
            out << "\"/>\n";
        }
        for (const auto& [p, color, r] : points_)
            out << "  <circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1]) << "\" r=\"" << r
                << "\" fill=\"" << color << "\"/>\n";
        for (const auto& [p, color] : markers_)
            out << "  <circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1])
                << "\" r=\"6\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2.5\"/>\n";
        out << "</svg>\n";
        return out.str();
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("svg: cannot open " + path);
        f << str();
    }

private:
    struct Point {
        Latent p;
        std::string color;
        double r;
    };
    struct Marker {
        Latent p;
        std::string color;
    };

    void add_point(const Latent& p, const std::string& color, double r) {
        require_2d(p);
        points_.push_back({p, color, r});
    }
    void add_marker(const Latent& p, const std::string& color) {
        require_2d(p);
        markers_.push_back({p, color});
    }
    static void require_2d(const Latent& p) {
        if (p.size() != 2) throw std::invalid_argument("svg: only 2-D latents can be plotted");
    }
    static std::string class_color(int label) {
        static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                        "#8c564b", "#e377c2", "#17becf", "#bcbd22"};
        return palette[static_cast<std::size_t>(label) % 8];
    }

    double width_, height_;
    std::vector<Point> points_;
    std::vector<Marker> markers_;
    std::vector<std::vector<Latent>> polylines_;
};

}  // namespace cartoonlab
