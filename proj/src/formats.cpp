#include "bfv/ingest/formats.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace bfv::ingest {

namespace wire {

void put_u32(std::ostream& out, std::uint32_t v)
{
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF),
                           static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes, 4);
}

void put_f32(std::ostream& out, float v)
{
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void put_magic(std::ostream& out, const char (&magic)[5])
{
    out.write(magic, 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what)
{
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw LengthError("truncated " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& in, const std::string& what)
{
    return std::bit_cast<float>(get_u32(in, what));
}

void expect_magic(std::istream& in, const char (&magic)[5])
{
    char got[4];
    if (!in.read(got, 4))
        throw FormatError(std::string("missing magic, expected ") + magic);
    if (std::memcmp(got, magic, 4) != 0)
        throw FormatError(std::string("bad magic \"") + std::string(got, 4) + "\", expected " +
                          magic);
    const std::uint32_t version = get_u32(in, "version");
    if (version != kFormatVersion)
        throw FormatError(std::string(magic) + ": unsupported version " + std::to_string(version));
}

void put_matrix(std::ostream& out, const Tensor& m)
{
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            put_f32(out, static_cast<float>(m(r, c)));
}

Tensor get_matrix(std::istream& in, Index rows, Index cols, const std::string& what)
{
    Tensor m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            m(r, c) = get_f32(in, what + " payload");
    return m;
}

void expect_eof(std::istream& in, const std::string& what)
{
    if (in.peek() != std::char_traits<char>::eof())
        throw LengthError(what + ": trailing bytes after payload");
}

} // namespace wire

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary)
{
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out)
        throw Error("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary)
{
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in)
        throw Error("cannot open: " + path.string());
    return in;
}

void check_rows_finite(const Tensor& m, const std::string& what)
{
    for (Index r = 0; r < m.rows(); ++r)
        if (!m.row(r).allFinite())
            throw DataError(what + ": non-finite value in row " + std::to_string(r));
}

std::uint32_t checked_u32(Index v, const char* what)
{
    if (v < 0 || v > static_cast<Index>(UINT32_MAX))
        throw ContractError(std::string(what) + " does not fit in u32");
    return static_cast<std::uint32_t>(v);
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_number(const std::string& cell, std::size_t line_no)
{
    const std::string t = trim(cell);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw FormatError("line " + std::to_string(line_no) + ": not a number: \"" + cell + "\"");
    return v;
}

} // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m)
{
    auto out = open_out(path, true);
    wire::put_magic(out, "BFVE");
    wire::put_u32(out, kFormatVersion);
    wire::put_u32(out, checked_u32(m.n(), "N"));
    wire::put_u32(out, checked_u32(m.dim(), "V"));
    wire::put_matrix(out, m.rows);
    if (!out)
        throw Error("write failed: " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path)
{
    auto in = open_in(path, true);
    wire::expect_magic(in, "BFVE");
    const Index n = wire::get_u32(in, "N");
    const Index v = wire::get_u32(in, "V");
    if (n < 1 || v < 1)
        throw FormatError(path.string() + ": empty embedding matrix");
    EmbeddingMatrix m;
    m.rows = wire::get_matrix(in, n, v, path.string());
    wire::expect_eof(in, path.string());
    check_rows_finite(m.rows, path.string());
    return m;
}

void write_token_embeddings(const std::filesystem::path& path, const TokenEmbeddingSet& s)
{
    auto out = open_out(path, true);
    wire::put_magic(out, "BFVT");
    wire::put_u32(out, kFormatVersion);
    wire::put_u32(out, checked_u32(s.n(), "N"));
    wire::put_u32(out, checked_u32(s.dim, "V"));
    for (const auto& d : s.documents)
        wire::put_u32(out, checked_u32(d.vectors.rows(), "token count"));
    for (const auto& d : s.documents) {
        if (static_cast<Index>(d.tokens.size()) != d.vectors.rows())
            throw ContractError("token strings do not align with token vectors");
        for (const auto& t : d.tokens) {
            wire::put_u32(out, checked_u32(static_cast<Index>(t.size()), "token length"));
            out.write(t.data(), static_cast<std::streamsize>(t.size()));
        }
    }
    for (const auto& d : s.documents) {
        if (d.vectors.cols() != s.dim)
            throw DimensionError("token matrix width differs from V");
        wire::put_matrix(out, d.vectors.cast<double>());
    }
    if (!out)
        throw Error("write failed: " + path.string());
}

TokenEmbeddingSet read_token_embeddings(const std::filesystem::path& path)
{
    auto in = open_in(path, true);
    wire::expect_magic(in, "BFVT");
    const Index n = wire::get_u32(in, "N");
    const Index v = wire::get_u32(in, "V");
    if (n < 1 || v < 1)
        throw FormatError(path.string() + ": empty token embedding set");
    TokenEmbeddingSet s;
    s.dim = v;
    s.documents.resize(static_cast<std::size_t>(n));
    for (auto& d : s.documents) {
        const Index t = wire::get_u32(in, "token counts");
        if (t < 1)
            throw DataError(path.string() + ": document with zero tokens");
        d.vectors.resize(t, v);
        d.tokens.reserve(static_cast<std::size_t>(t));
    }
    for (auto& d : s.documents) {
        for (Index i = 0; i < d.vectors.rows(); ++i) {
            const std::uint32_t len = wire::get_u32(in, "token string length");
            std::string tok(len, '\0');
            if (!in.read(tok.data(), len))
                throw LengthError("truncated token string");
            d.tokens.push_back(std::move(tok));
        }
    }
    for (std::size_t i = 0; i < s.documents.size(); ++i) {
        auto& d = s.documents[i];
        for (Index r = 0; r < d.vectors.rows(); ++r)
            for (Index c = 0; c < v; ++c)
                d.vectors(r, c) = wire::get_f32(in, path.string() + " payload");
        if (!d.vectors.allFinite())
            throw DataError(path.string() + ": non-finite value in document " + std::to_string(i));
    }
    wire::expect_eof(in, path.string());
    return s;
}

NumericTable read_table(const std::filesystem::path& path)
{
    auto in = open_in(path, false);
    NumericTable t;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        auto cells = split_csv_line(line);
        if (!have_header) {
            if (cells.size() < 2 || trim(cells[0]) != "doc_id")
                throw FormatError(path.string() + ": header must be doc_id,<topic1>,...");
            std::set<std::string> seen;
            for (std::size_t i = 1; i < cells.size(); ++i) {
                std::string name = trim(cells[i]);
                if (!seen.insert(name).second)
                    throw FormatError(path.string() + ": duplicate topic column " + name);
                t.topics.push_back(std::move(name));
            }
            have_header = true;
            continue;
        }
        if (cells.size() != t.topics.size() + 1)
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(t.topics.size() + 1));
        t.doc_ids.push_back(trim(cells[0]));
        std::vector<double> row;
        row.reserve(t.topics.size());
        for (std::size_t i = 1; i < cells.size(); ++i)
            row.push_back(parse_number(cells[i], line_no));
        rows.push_back(std::move(row));
    }
    if (!have_header)
        throw FormatError(path.string() + ": missing header");
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.topics.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            t.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    check_rows_finite(t.values, path.string());
    return t;
}

void write_table(std::ostream& out, const NumericTable& table, const std::string& comment)
{
    if (!comment.empty())
        out << "# " << comment << '\n';
    out << "doc_id";
    for (const auto& name : table.topics)
        out << ',' << name;
    out << '\n';
    // Shortest round-trip representation keeps files byte-stable.
    char buf[64];
    for (Index r = 0; r < table.values.rows(); ++r) {
        out << (static_cast<std::size_t>(r) < table.doc_ids.size() ? table.doc_ids[r]
                                                                   : std::to_string(r));
        for (Index c = 0; c < table.values.cols(); ++c) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), table.values(r, c));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
}

void write_table(const std::filesystem::path& path, const NumericTable& table,
                 const std::string& comment)
{
    auto out = open_out(path, false);
    write_table(out, table, comment);
    if (!out)
        throw Error("write failed: " + path.string());
}

LabelMatrix labels_from_table(const NumericTable& table)
{
    if (table.topics.empty())
        throw ContractError("label table has no topic columns");
    LabelMatrix l;
    l.topics = table.topics;
    l.doc_ids = table.doc_ids;
    l.values.resize(table.values.rows(), table.values.cols());
    for (Index r = 0; r < table.values.rows(); ++r)
        for (Index c = 0; c < table.values.cols(); ++c) {
            const double v = table.values(r, c);
            if (v != 0.0 && v != 1.0)
                throw DataError("label row " + std::to_string(r) + ": value outside {0,1}");
            l.values(r, c) = static_cast<int>(v);
        }
    return l;
}

LabelMatrix read_labels(const std::filesystem::path& path)
{
    return labels_from_table(read_table(path));
}

void write_labels(const std::filesystem::path& path, const LabelMatrix& labels,
                  const std::string& comment)
{
    NumericTable t{labels.values.cast<double>(), labels.topics, labels.doc_ids};
    write_table(path, t, comment);
}

SeedSpec parse_seed_spec(const std::string& text)
{
    SeedSpec spec;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> names;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw FormatError("seed spec line " + std::to_string(line_no) + ": missing ':'");
        std::string name = trim(line.substr(0, colon));
        if (name.empty() || !names.insert(name).second)
            throw FormatError("seed spec line " + std::to_string(line_no) +
                              ": empty or duplicate topic name");
        std::vector<std::string> words;
        std::istringstream ws(line.substr(colon + 1));
        std::string w;
        while (std::getline(ws, w, ','))
            if (auto t = trim(w); !t.empty())
                words.push_back(std::move(t));
        if (words.empty())
            throw FormatError("seed spec topic " + name + " has no seed words");
        spec.topics.emplace_back(std::move(name), std::move(words));
    }
    return spec;
}

SeedSpec read_seed_spec(const std::filesystem::path& path)
{
    auto in = open_in(path, false);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_seed_spec(ss.str());
}

void write_seed_spec(const std::filesystem::path& path, const SeedSpec& spec)
{
    auto out = open_out(path, false);
    for (const auto& [name, words] : spec.topics) {
        out << name << ':';
        for (std::size_t i = 0; i < words.size(); ++i)
            out << (i == 0 ? " " : ", ") << words[i];
        out << '\n';
    }
}

} // namespace bfv::ingest
