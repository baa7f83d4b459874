#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace valmon::csv {

using Row = std::vector<std::string>;

/// Parses RFC-4180 text: quoted fields, doubled quotes, CRLF or LF line ends,
/// embedded newlines inside quotes. A trailing newline does not produce an
/// empty record. Throws `InvalidArgument` on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void append_row(std::string &out, const Row &row);

std::string read_file(const std::string &path);
void write_file(const std::string &path, std::string_view contents);

}  // namespace valmon::csv
