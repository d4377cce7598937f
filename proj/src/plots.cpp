#include "moodshift/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "moodshift/error.hpp"

namespace moodshift {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Piecewise-linear approximation of a perceptual dark-to-bright map.
std::string heat_colour(double u) {
    static const double stops[5][3] = {
        {0.05, 0.03, 0.20}, {0.35, 0.10, 0.50}, {0.75, 0.25, 0.40}, {0.98, 0.60, 0.20}, {0.99, 0.95, 0.60}};
    u = std::clamp(u, 0.0, 1.0) * 4.0;
    const int i = std::min(3, static_cast<int>(u));
    const double f = u - i;
    char buf[16];
    int rgb[3];
    for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(255.0 * (stops[i][c] * (1 - f) + stops[i + 1][c] * f)));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

const char* kLineColours[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"};

void save(const std::filesystem::path& path, const std::string& body, double w, double h) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write plot " + path.string());
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body << "</svg>\n";
}

struct Frame {
    double x, y, w, h;
    double x0, x1, y0, y1;
    double px(double v) const { return x + (v - x0) / (x1 - x0) * w; }
    double py(double v) const { return y + h - (v - y0) / (y1 - y0) * h; }
};

void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    os << "<rect x=\"" << num(f.x) << "\" y=\"" << num(f.y) << "\" width=\"" << num(f.w) << "\" height=\""
       << num(f.h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double vx = f.x0 + (f.x1 - f.x0) * k / 4.0;
        const double vy = f.y0 + (f.y1 - f.y0) * k / 4.0;
        os << "<text x=\"" << num(f.px(vx)) << "\" y=\"" << num(f.y + f.h + 14) << "\" text-anchor=\"middle\">"
           << num(vx) << "</text>\n";
        os << "<text x=\"" << num(f.x - 4) << "\" y=\"" << num(f.py(vy) + 4) << "\" text-anchor=\"end\">" << num(vy)
           << "</text>\n";
    }
    os << "<text x=\"" << num(f.x + f.w / 2) << "\" y=\"" << num(f.y + f.h + 30) << "\" text-anchor=\"middle\">"
       << escape(xlabel) << "</text>\n";
    os << "<text transform=\"translate(" << num(f.x - 42) << "," << num(f.y + f.h / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

}  // namespace

void write_diagnostics_plot(const std::filesystem::path& path, const std::vector<LabeledMel>& mels,
                            const std::vector<LabeledContour>& contours) {
    if (mels.empty()) throw ContractError("diagnostics plot needs at least one spectrogram");
    double lo = mels.front().mel.minCoeff(), hi = mels.front().mel.maxCoeff();
    for (const auto& m : mels) {
        lo = std::min(lo, m.mel.minCoeff());
        hi = std::max(hi, m.mel.maxCoeff());
    }
    const double span = hi > lo ? hi - lo : 1.0;
    const double panel_w = 240, panel_h = 160, margin = 60, gap = 30;
    std::ostringstream os;
    for (std::size_t k = 0; k < mels.size(); ++k) {
        const Matrix& m = mels[k].mel;
        const double x = margin + k * (panel_w + gap), y = 30;
        const double cw = panel_w / m.cols(), ch = panel_h / m.rows();
        os << "<text x=\"" << num(x + panel_w / 2) << "\" y=\"20\" text-anchor=\"middle\">" << escape(mels[k].label)
           << "</text>\n";
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                // Low mel bins at the bottom.
                os << "<rect x=\"" << num(x + c * cw) << "\" y=\"" << num(y + (m.rows() - 1 - r) * ch)
                   << "\" width=\"" << num(cw + 0.3) << "\" height=\"" << num(ch + 0.3) << "\" fill=\""
                   << heat_colour((m(r, c) - lo) / span) << "\"/>\n";
            }
        }
        os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(panel_w) << "\" height=\""
           << num(panel_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(x + panel_w / 2) << "\" y=\"" << num(y + panel_h + 14)
           << "\" text-anchor=\"middle\">frame</text>\n";
    }
    os << "<text transform=\"translate(" << num(margin - 12) << "," << num(30 + panel_h / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">mel bin</text>\n";

    const double width = margin * 2 + mels.size() * (panel_w + gap);
    double height = 30 + panel_h + 40;
    if (!contours.empty()) {
        double t_max = 0.0, f_max = 0.0;
        for (const auto& c : contours) {
            if (c.contour.frame_rate > 0) t_max = std::max(t_max, c.contour.f0.size() / c.contour.frame_rate);
            for (double f : c.contour.f0) f_max = std::max(f_max, f);
        }
        if (t_max <= 0.0) t_max = 1.0;
        f_max = f_max > 0.0 ? std::ceil(f_max / 50.0) * 50.0 : 500.0;
        const Frame f{margin, height + 10, width - 2 * margin - 120, 180, 0.0, t_max, 0.0, f_max};
        axes(os, f, "time (s)", "f0 (Hz)");
        for (std::size_t k = 0; k < contours.size(); ++k) {
            const auto& c = contours[k].contour;
            const char* colour = kLineColours[k % 7];
            // Break the polyline at unvoiced frames.
            std::string pts;
            auto flush = [&] {
                if (!pts.empty()) {
                    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"" << pts
                       << "\"/>\n";
                }
                pts.clear();
            };
            for (std::size_t i = 0; i < c.f0.size(); ++i) {
                if (c.f0[i] <= 0.0) {
                    flush();
                    continue;
                }
                pts += num(f.px(i / c.frame_rate)) + "," + num(f.py(c.f0[i])) + " ";
            }
            flush();
            const double ly = f.y + 14 + 16 * k;
            os << "<line x1=\"" << num(f.x + f.w + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(f.x + f.w + 30)
               << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << num(f.x + f.w + 34) << "\" y=\"" << num(ly) << "\">" << escape(contours[k].label)
               << "</text>\n";
        }
        height = f.y + f.h + 45;
    }
    save(path, os.str(), width, height);
}

void write_classwise_plot(const std::filesystem::path& path, const std::array<ClassStats, 7>& by_target,
                          const std::array<ClassStats, 7>& by_source) {
    double top = 0.0;
    for (const auto* stats : {&by_target, &by_source}) {
        for (const auto& c : *stats) top = std::max(top, c.mean + c.sd);
    }
    top = top > 0.0 ? top * 1.1 : 1.0;
    std::ostringstream os;
    const char* titles[2] = {"by target arousal", "by source arousal"};
    const std::array<ClassStats, 7>* groups[2] = {&by_target, &by_source};
    for (int g = 0; g < 2; ++g) {
        const Frame f{70.0 + g * 330.0, 30, 260, 200, 0.5, 7.5, 0.0, top};
        os << "<text x=\"" << num(f.x + f.w / 2) << "\" y=\"20\" text-anchor=\"middle\">" << titles[g] << "</text>\n";
        os << "<rect x=\"" << num(f.x) << "\" y=\"" << num(f.y) << "\" width=\"" << num(f.w) << "\" height=\""
           << num(f.h) << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double v = top * k / 4.0;
            os << "<text x=\"" << num(f.x - 4) << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">"
               << tick(v) << "</text>\n";
        }
        for (const auto& c : *groups[g]) {
            const double cx = f.px(c.bin);
            os << "<text x=\"" << num(cx) << "\" y=\"" << num(f.y + f.h + 14) << "\" text-anchor=\"middle\">" << c.bin
               << "</text>\n";
            if (c.empty) {
                os << "<text x=\"" << num(cx) << "\" y=\"" << num(f.y + f.h - 6)
                   << "\" text-anchor=\"middle\" fill=\"#888\">empty</text>\n";
                continue;
            }
            os << "<rect x=\"" << num(cx - 12) << "\" y=\"" << num(f.py(c.mean)) << "\" width=\"24\" height=\""
               << num(f.py(0) - f.py(c.mean)) << "\" fill=\"#7570b3\"/>\n";
            os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(std::max(0.0, c.mean - c.sd))) << "\" x2=\""
               << num(cx) << "\" y2=\"" << num(f.py(c.mean + c.sd)) << "\" stroke=\"black\"/>\n";
        }
        os << "<text x=\"" << num(f.x + f.w / 2) << "\" y=\"" << num(f.y + f.h + 30)
           << "\" text-anchor=\"middle\">arousal bin</text>\n";
    }
    os << "<text transform=\"translate(22,130) rotate(-90)\" text-anchor=\"middle\">squared normalized error</text>\n";
    save(path, os.str(), 700, 280);
}

void write_moment_plot(const std::filesystem::path& path, const MomentSeries& s) {
    if (s.t.empty()) throw ContractError("moment plot needs at least one time point");
    std::ostringstream os;
    const std::vector<double>* emp[2] = {&s.empirical_mean, &s.empirical_var};
    const std::vector<double>* ana[2] = {&s.analytic_mean, &s.analytic_var};
    const char* names[2] = {"mean", "variance"};
    for (int g = 0; g < 2; ++g) {
        double lo = 0.0, hi = 0.0;
        for (const auto* v : {emp[g], ana[g]}) {
            for (double x : *v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        if (hi <= lo) hi = lo + 1.0;
        const Frame f{70.0 + g * 330.0, 30, 250, 200, 0.0, 1.0, lo, hi * 1.05};
        axes(os, f, "t", names[g]);
        std::string pts;
        for (std::size_t i = 0; i < s.t.size(); ++i) pts += num(f.px(s.t[i])) + "," + num(f.py((*ana[g])[i])) + " ";
        os << "<polyline fill=\"none\" stroke=\"#1b9e77\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            os << "<circle cx=\"" << num(f.px(s.t[i])) << "\" cy=\"" << num(f.py((*emp[g])[i]))
               << "\" r=\"3\" fill=\"none\" stroke=\"#d95f02\"/>\n";
        }
    }
    os << "<text x=\"70\" y=\"18\">line: closed form, circles: simulation</text>\n";
    save(path, os.str(), 700, 280);
}

}  // namespace moodshift
