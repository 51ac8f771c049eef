#include "winpomdp/textio.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace winpomdp {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write file: " + path.string());
    out << content;
}

TextReader::TextReader(const std::filesystem::path& path) {
    text_ = read_file(path);
    name_ = path.string();
}

TextReader TextReader::from_string(std::string text, std::string name) {
    TextReader r;
    r.text_ = std::move(text);
    r.name_ = std::move(name);
    return r;
}

void TextReader::skip_ws_and_comments() {
    while (pos_ < text_.size()) {
        char c = text_[pos_];
        if (c == '#') {
            while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            if (c == '\n') ++line_;
            ++pos_;
        } else {
            break;
        }
    }
}

bool TextReader::eof() {
    skip_ws_and_comments();
    return pos_ >= text_.size();
}

std::string TextReader::next_token() {
    skip_ws_and_comments();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '#') {
        ++pos_;
    }
    return text_.substr(start, pos_ - start);
}

std::string TextReader::peek_token() {
    std::size_t save_pos = pos_;
    int save_line = line_;
    if (eof()) return {};
    std::string tok = next_token();
    pos_ = save_pos;
    line_ = save_line;
    return tok;
}

void TextReader::expect(const std::string& keyword) {
    std::string tok = next_token();
    if (tok != keyword) fail("expected '" + keyword + "', got '" + tok + "'");
}

long long TextReader::next_int() {
    std::string tok = next_token();
    char* end = nullptr;
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') fail("expected integer, got '" + tok + "'");
    return v;
}

double TextReader::next_double() {
    std::string tok = next_token();
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("expected number, got '" + tok + "'");
    return v;
}

std::vector<double> TextReader::next_doubles(int count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto& v : out) v = next_double();
    return out;
}

int TextReader::read_header(const std::string& format_name) {
    std::string name = next_token();
    if (name != format_name) fail("expected format '" + format_name + "', got '" + name + "'");
    std::string ver = next_token();
    if (ver.size() < 2 || ver[0] != 'v') fail("malformed version tag '" + ver + "'");
    char* end = nullptr;
    long v = std::strtol(ver.c_str() + 1, &end, 10);
    if (*end != '\0' || v <= 0) fail("malformed version tag '" + ver + "'");
    return static_cast<int>(v);
}

void TextReader::fail(const std::string& message) const {
    throw ParseError(name_ + ":" + std::to_string(line_) + ": " + message);
}

void TextWriter::keyword(const std::string& k) {
    if (line_started_) out_ += ' ';
    out_ += k;
    line_started_ = true;
}

void TextWriter::value(double v) { keyword(format_double(v)); }

void TextWriter::value(long long v) { keyword(std::to_string(v)); }

void TextWriter::value(const std::string& s) { keyword(s); }

void TextWriter::row(std::span<const double> values) {
    for (double v : values) value(v);
    endl();
}

void TextWriter::endl() {
    out_ += '\n';
    line_started_ = false;
}

void TextWriter::save(const std::filesystem::path& path) const { write_file(path, out_); }

}  // namespace winpomdp
