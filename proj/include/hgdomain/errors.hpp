#ifndef HGDOMAIN_ERRORS_HPP
#define HGDOMAIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hgdomain {

/**
 * Malformed or inconsistent input data: unreadable files, ragged CSV rows,
 * duplicate ids, misaligned spot sets.
 */
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Numerical failure: singular covariance, non-finite training loss.
 */
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}

#endif
