#include "seqflow/spectrum.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <thread>

#include "seqflow/numerics.hpp"

namespace seqflow {

const char* to_string(IngestErrorCode code) {
    switch (code) {
        case IngestErrorCode::unreadable: return "unreadable";
        case IngestErrorCode::non_utf8: return "non-UTF8";
        case IngestErrorCode::missing_target_column: return "missing target column";
        case IngestErrorCode::zero_usable_rows: return "zero usable rows";
    }
    return "unknown";
}

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        if (c < 0x80) {
            len = 1;
        } else if ((c >> 5) == 0x6) {
            len = 2;
            if (c < 0xC2) return false;  // overlong
        } else if ((c >> 4) == 0xE) {
            len = 3;
        } else if ((c >> 3) == 0x1E && c <= 0xF4) {
            len = 4;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        i += len;
    }
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_fields(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

bool parse_number(std::string_view s, double& v) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v);
}

char detect_delimiter(std::string_view header) {
    std::size_t best = 0;
    char delim = ',';
    for (char c : {',', ';', '\t'}) {
        const auto k = static_cast<std::size_t>(std::count(header.begin(), header.end(), c));
        if (k > best) {
            best = k;
            delim = c;
        }
    }
    return delim;
}

}  // namespace

TabularDataset parse_csv_text(const std::string& text_in, const std::string& target_column) {
    std::string_view text(text_in);
    if (!valid_utf8(text)) throw IngestError(IngestErrorCode::non_utf8, "input is not valid UTF-8");
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(pos, end - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw IngestError(IngestErrorCode::zero_usable_rows, "zero usable rows (empty input)");

    const char delim = detect_delimiter(lines[first]);
    const auto header = split_fields(lines[first], delim);
    const auto it = std::find(header.begin(), header.end(), target_column);
    if (it == header.end())
        throw IngestError(IngestErrorCode::missing_target_column, "missing target column '" + target_column + "'");
    const std::size_t target_idx = static_cast<std::size_t>(it - header.begin());

    TabularDataset ds;
    ds.target_name = target_column;
    for (std::size_t k = 0; k < header.size(); ++k)
        if (k != target_idx) ds.feature_names.push_back(header[k]);

    for (std::size_t li = first + 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const auto fields = split_fields(lines[li], delim);
        bool ok = fields.size() == header.size();
        std::vector<double> row;
        double y = 0.0;
        for (std::size_t k = 0; ok && k < fields.size(); ++k) {
            double v;
            if (!parse_number(fields[k], v)) {
                ok = false;
                break;
            }
            if (k == target_idx) {
                y = v;
            } else {
                row.push_back(v);
            }
        }
        if (!ok) {
            ++ds.dropped_count;
            continue;
        }
        ds.features.push_back(std::move(row));
        ds.target.push_back(y);
    }
    if (ds.target.empty()) throw IngestError(IngestErrorCode::zero_usable_rows, "zero usable rows");
    return ds;
}

TabularDataset ingest_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(IngestErrorCode::unreadable, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IngestError(IngestErrorCode::unreadable, "cannot read '" + path + "'");
    return parse_csv_text(buf.str(), target_column);
}

NormalizedDataset normalize_to_torus(const TabularDataset& data) {
    NormalizedDataset out;
    const std::size_t n = data.n(), d = data.d();
    out.guard = 2.0 / (10.0 * static_cast<double>(n));
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < d; ++k) {
        double lo = data.features[0][k], hi = lo;
        for (const auto& row : data.features) {
            lo = std::min(lo, row[k]);
            hi = std::max(hi, row[k]);
        }
        if (!(hi > lo)) {
            out.dropped_features.push_back(data.feature_names[k]);
            out.warnings.push_back("constant feature '" + data.feature_names[k] + "' dropped");
            continue;
        }
        keep.push_back(k);
        out.maps.push_back({data.feature_names[k], lo, hi});
    }
    out.data.target = data.target;
    out.data.target_name = data.target_name;
    out.data.dropped_count = data.dropped_count;
    for (const auto& m : out.maps) out.data.feature_names.push_back(m.name);
    out.data.features.assign(n, std::vector<double>(keep.size()));
    const double width = 2.0 - out.guard;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < keep.size(); ++j) {
            const auto& m = out.maps[j];
            const double u = (data.features[i][keep[j]] - m.min) / (m.max - m.min);
            out.data.features[i][j] = -1.0 + u * width;
        }
    }
    return out;
}

double CoefficientSpectrum::top_k_energy_fraction(std::size_t k) const {
    if (total_energy <= 0.0) return 0.0;
    std::vector<double> sq(entries.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = entries[i].coefficient * entries[i].coefficient;
    std::sort(sq.begin(), sq.end(), std::greater<>());
    sq.resize(std::min(k, sq.size()));
    return pairwise_sum(sq) / total_energy;
}

CoefficientSpectrum empirical_coefficients(const TabularDataset& data, const FourierDesign& basis, unsigned threads) {
    const std::size_t n = data.n(), M = basis.index_list.size();
    if (n == 0) throw std::invalid_argument("empirical_coefficients: empty dataset");
    if (static_cast<std::size_t>(basis.d) != data.d())
        throw std::invalid_argument("empirical_coefficients: basis dimension differs from feature count");
    CoefficientSpectrum spec;
    spec.n = n;
    spec.entries.resize(M);
    std::vector<double> terms_y(n);
    for (std::size_t i = 0; i < n; ++i) terms_y[i] = data.target[i] * data.target[i];
    spec.target_energy = pairwise_sum(terms_y) / static_cast<double>(n);
    spec.noise_floor = std::sqrt(spec.target_energy / static_cast<double>(n));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        std::vector<double> terms(n);
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= M) return;
            const auto& e = basis.index_list[k];
            for (std::size_t i = 0; i < n; ++i) terms[i] = data.target[i] * e.eval(data.features[i]);
            auto& ent = spec.entries[k];
            ent.rank = k + 1;
            ent.multi_index = e.label();
            ent.lambda = e.lambda;
            ent.coefficient = pairwise_sum(terms) / static_cast<double>(n);
        }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(threads == 0 ? std::thread::hardware_concurrency() : threads,
                                                        static_cast<unsigned>(std::max<std::size_t>(M, 1))));
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::vector<double> sq(M);
    for (std::size_t k = 0; k < M; ++k) sq[k] = spec.entries[k].coefficient * spec.entries[k].coefficient;
    spec.total_energy = pairwise_sum(sq);
    double run = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
        run += sq[k];
        spec.entries[k].cumulative_energy_fraction = spec.total_energy > 0.0 ? run / spec.total_energy : 0.0;
    }
    return spec;
}

void write_spectrum_csv(std::ostream& out, const CoefficientSpectrum& spec) {
    out << "rank,multi_index,lambda,coefficient,cumulative_energy_fraction\n";
    char buf[200];
    for (const auto& e : spec.entries) {
        std::snprintf(buf, sizeof buf, "%zu,%s,%.12g,%.12g,%.12g\n", e.rank, e.multi_index.c_str(), e.lambda,
                      e.coefficient, e.cumulative_energy_fraction);
        out << buf;
    }
}

}  // namespace seqflow
