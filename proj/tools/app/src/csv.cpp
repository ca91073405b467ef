#include "ringfc_app/csv.hpp"

#include "ringfc_app/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ringfc::app {

const std::map<std::string, std::vector<std::string>>& csv_schemas()
{
    static const std::map<std::string, std::vector<std::string>> s{
        {"map", {"wavelength_nm", "voltage_V", "transmission"}},
        {"idler", {"wavelength_nm", "p_iplus_w", "p_iminus_w", "dataset_id"}},
        {"spectrum", {"voltage_V", "wavelength_nm", "omega_rad_s", "transmission"}},
        {"convert", {"delta_ab_rad_s", "omega_offset_rad_s", "T_s", "T_iplus", "T_iminus", "eta_iplus", "eta_iminus", "zeta_db"}},
        {"cascade", {"chi_bar_rad_s", "eta_cascade", "eta_single"}},
        {"purity", {"ratio", "purity", "n_grid", "last_change"}},
        {"control", {"t_s", "chi_re", "chi_im", "chi_abs"}},
        {"emission", {"t", "chi", "S_out_re", "S_out_im", "occ_s", "occ_o", "occ_minus", "occ_B"}},
        {"sweep", {"G", "QL_Qo", "eta_out", "dw_over_gamma"}},
        {"fit_cost", {"iteration", "residual_norm"}},
    };
    return s;
}

const std::vector<std::string>& csv_schema(const std::string& name)
{
    auto it = csv_schemas().find(name);
    if (it == csv_schemas().end()) throw Error("no CSV schema named " + name);
    return it->second;
}

std::string describe_schemas()
{
    std::string out;
    for (const auto& [name, cols] : csv_schemas()) {
        out += name + ":";
        for (const auto& c : cols) out += " " + c;
        out += "\n";
    }
    return out;
}

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& schema)
    : path_(path), columns_(csv_schema(schema).size())
{
    const auto& cols = csv_schema(schema);
    for (std::size_t k = 0; k < cols.size(); ++k) buffer_ += (k ? "," : "") + cols[k];
    buffer_ += "\n";
}

CsvWriter& CsvWriter::operator<<(double v) { return *this << format_double(v); }

CsvWriter& CsvWriter::operator<<(const std::string& v)
{
    if (in_row_ == columns_) throw Error("too many columns for " + path_.string());
    buffer_ += (in_row_ ? "," : "") + v;
    ++in_row_;
    return *this;
}

void CsvWriter::end_row()
{
    if (in_row_ != columns_) throw Error("row with missing columns for " + path_.string());
    buffer_ += "\n";
    in_row_ = 0;
}

void CsvWriter::close()
{
    std::ofstream f(path_, std::ios::binary);
    if (!f) throw IoError("cannot write " + path_.string());
    f << buffer_;
    if (!f) throw IoError("write failed for " + path_.string());
}

std::size_t Table::column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }
    return out;
}

} // namespace

Table read_csv(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    Table t;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        auto row = split(line);
        if (row.size() != t.header.size())
            throw DataError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(row.size())
                            + " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(path.string() + ": empty file");
    return t;
}

void require_columns(const Table& t, const std::string& schema, const std::filesystem::path& path)
{
    std::string missing;
    for (const auto& c : csv_schema(schema))
        if (std::find(t.header.begin(), t.header.end(), c) == t.header.end()) missing += (missing.empty() ? "" : ", ") + c;
    if (!missing.empty()) {
        std::string expected;
        for (const auto& c : csv_schema(schema)) expected += (expected.empty() ? "" : ", ") + c;
        throw DataError(path.string() + ": missing columns " + missing + " (expected: " + expected + ")");
    }
}

double to_double(const std::string& s, const std::filesystem::path& path, std::size_t row)
{
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e)
        throw DataError(path.string() + ": row " + std::to_string(row + 1) + ": not a number: '" + s + "'");
    return v;
}

MeasuredMap load_map(const std::filesystem::path& path, const std::string& dataset_id)
{
    const Table t = read_csv(path);
    require_columns(t, "map", path);
    const std::size_t cl = t.column("wavelength_nm"), cv = t.column("voltage_V"), ct = t.column("transmission");
    std::vector<double> lam, V;
    std::vector<std::array<double, 3>> rec;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double l = to_double(t.rows[r][cl], path, r), v = to_double(t.rows[r][cv], path, r), x = to_double(t.rows[r][ct], path, r);
        rec.push_back({l, v, x});
        lam.push_back(l);
        V.push_back(v);
    }
    auto uniq = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    MeasuredMap m;
    m.wavelength_nm = uniq(lam);
    m.voltage = uniq(V);
    m.dataset_id = dataset_id;
    if (rec.size() != m.wavelength_nm.size() * m.voltage.size())
        throw DataError(path.string() + ": map is not a full (voltage, wavelength) grid");
    m.transmission.setConstant(static_cast<Eigen::Index>(m.voltage.size()), static_cast<Eigen::Index>(m.wavelength_nm.size()),
                               std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : rec) {
        const auto i = std::lower_bound(m.voltage.begin(), m.voltage.end(), r[1]) - m.voltage.begin();
        const auto j = std::lower_bound(m.wavelength_nm.begin(), m.wavelength_nm.end(), r[0]) - m.wavelength_nm.begin();
        m.transmission(i, j) = r[2];
    }
    if (!m.transmission.allFinite()) throw DataError(path.string() + ": duplicate or missing grid points");
    m.validate();
    return m;
}

IdlerSpectra load_idler(const std::filesystem::path& path, const std::string& dataset_id)
{
    const Table t = read_csv(path);
    require_columns(t, "idler", path);
    const std::size_t cl = t.column("wavelength_nm"), cp = t.column("p_iplus_w"), cm = t.column("p_iminus_w"), cd = t.column("dataset_id");
    std::vector<std::array<double, 3>> rec;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (t.rows[r][cd] == dataset_id)
            rec.push_back({to_double(t.rows[r][cl], path, r), to_double(t.rows[r][cp], path, r), to_double(t.rows[r][cm], path, r)});
    if (rec.empty()) throw DataError(path.string() + ": no rows for dataset_id " + dataset_id);
    std::sort(rec.begin(), rec.end());
    IdlerSpectra s;
    for (const auto& r : rec) {
        s.wavelength_nm.push_back(r[0]);
        s.p_i_plus.push_back(r[1]);
        s.p_i_minus.push_back(r[2]);
    }
    return s;
}

void write_map(const std::filesystem::path& path, const MeasuredMap& m)
{
    CsvWriter w(path, "map");
    for (std::size_t i = 0; i < m.voltage.size(); ++i)
        for (std::size_t j = 0; j < m.wavelength_nm.size(); ++j) {
            w << m.wavelength_nm[j] << m.voltage[i] << m.transmission(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            w.end_row();
        }
    w.close();
}

void write_idler(const std::filesystem::path& path, const MeasuredMap& m)
{
    if (!m.idler) throw DataError("dataset " + m.dataset_id + " has no idler spectra");
    CsvWriter w(path, "idler");
    for (std::size_t j = 0; j < m.idler->wavelength_nm.size(); ++j) {
        w << m.idler->wavelength_nm[j] << m.idler->p_i_plus[j] << m.idler->p_i_minus[j] << m.dataset_id;
        w.end_row();
    }
    w.close();
}

} // namespace ringfc::app
