#pragma once

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "winpomdp/errors.hpp"

namespace winpomdp {

// Formats a double so that parsing it back is exact.
std::string format_double(double v);

// Whitespace-token reader for the versioned structured text formats used by
// fixtures, models, policies and configs. '#' starts a comment to end of line.
class TextReader {
public:
    explicit TextReader(const std::filesystem::path& path);
    static TextReader from_string(std::string text, std::string name = "<string>");

    bool eof();
    std::string next_token();
    std::string peek_token();
    void expect(const std::string& keyword);
    long long next_int();
    double next_double();
    std::vector<double> next_doubles(int count);

    // Reads "<format> v<N>" and returns N; rejects other format names.
    int read_header(const std::string& format_name);

    [[noreturn]] void fail(const std::string& message) const;

private:
    TextReader() = default;
    void skip_ws_and_comments();

    std::string text_;
    std::string name_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

class TextWriter {
public:
    void keyword(const std::string& k);
    void value(double v);
    void value(long long v);
    void value(int v) { value(static_cast<long long>(v)); }
    void value(const std::string& s);
    void row(std::span<const double> values);
    void endl();
    const std::string& str() const { return out_; }
    void save(const std::filesystem::path& path) const;

private:
    std::string out_;
    bool line_started_ = false;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace winpomdp
