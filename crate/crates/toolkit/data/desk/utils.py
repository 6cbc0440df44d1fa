def add_numbers(a, b):
    """Return the sum of two numbers."""
    result = a + b
    if result is None:
        return 0
    return result


def clamp(value, low, high):
    """Clamp a value into the closed range between low and high."""
    if value < low:
        return low
    if value > high:
        return high
    return value


def mean(values):
    """Compute the arithmetic mean of a list of values."""
    if not values:
        return 0.0
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def count_words(text):
    """Count how many words appear in the given text."""
    words = text.split()
    counts = {}
    for word in words:
        counts[word] = counts.get(word, 0) + 1
    return counts


def is_palindrome(word):
    """Check whether a word reads the same in both directions."""
    cleaned = word.lower().strip()
    left = 0
    right = len(cleaned) - 1
    while left < right:
        if cleaned[left] != cleaned[right]:
            return False
        left += 1
        right -= 1
    return True


def factorial(n):
    """Return the factorial of a non negative integer."""
    if n < 0:
        raise ValueError("n must be non negative")
    result = 1
    for i in range(2, n + 1):
        result *= i
    return result


def fibonacci(n):
    """Return the first n fibonacci numbers as a list."""
    sequence = []
    a, b = 0, 1
    for _ in range(n):
        sequence.append(a)
        a, b = b, a + b
    return sequence


def find_max(items):
    """Find the largest item in a non empty list."""
    if not items:
        raise ValueError("empty list")
    best = items[0]
    for item in items[1:]:
        if item > best:
            best = item
    return best


def reverse_string(text):
    """Return the characters of the text in reverse order."""
    chars = list(text)
    chars.reverse()
    result = "".join(chars)
    return result


def flatten(nested):
    """Flatten a list of lists into a single list."""
    flat = []
    for inner in nested:
        for item in inner:
            flat.append(item)
    return flat


def unique(items):
    """Return the unique items of a list in their original order."""
    seen = set()
    result = []
    for item in items:
        if item not in seen:
            seen.add(item)
            result.append(item)
    return result


def read_lines(path):
    """Read a file and return its non empty lines."""
    with open(path) as handle:
        lines = handle.readlines()
    result = []
    for line in lines:
        if line.strip():
            result.append(line.rstrip())
    return result


def write_lines(path, lines):
    """Write each line of the list into the file at path."""
    with open(path, "w") as handle:
        for line in lines:
            handle.write(line)
            handle.write("\n")
    return len(lines)


def is_prime(n):
    """Check whether a number is prime."""
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def primes_below(limit):
    """Return every prime number below the limit."""
    primes = []
    for n in range(2, limit):
        if is_prime(n):
            primes.append(n)
    return primes


def gcd(a, b):
    """Return the greatest common divisor of two integers."""
    while b != 0:
        a, b = b, a % b
    if a < 0:
        a = -a
    return a


def lcm(a, b):
    """Return the least common multiple of two integers."""
    if a == 0 or b == 0:
        return 0
    g = gcd(a, b)
    result = abs(a * b) // g
    return result


def merge_dicts(first, second):
    """Merge two dictionaries into a new one, the second one wins."""
    merged = {}
    for key in first:
        merged[key] = first[key]
    for key in second:
        merged[key] = second[key]
    return merged


def chunk(items, size):
    """Split a list into chunks of the given size."""
    if size <= 0:
        raise ValueError("size must be positive")
    chunks = []
    for start in range(0, len(items), size):
        chunks.append(items[start:start + size])
    return chunks


def binary_search(items, target):
    """Return the index of target in a sorted list or minus one."""
    low = 0
    high = len(items) - 1
    while low <= high:
        mid = (low + high) // 2
        if items[mid] == target:
            return mid
        if items[mid] < target:
            low = mid + 1
        else:
            high = mid - 1
    return -1


def bubble_sort(items):
    """Sort a list in place with bubble sort and return it."""
    n = len(items)
    for i in range(n):
        for j in range(n - i - 1):
            if items[j] > items[j + 1]:
                items[j], items[j + 1] = items[j + 1], items[j]
    return items


def celsius_to_fahrenheit(celsius):
    """Convert a temperature from celsius to fahrenheit."""
    if celsius is None:
        return None
    fahrenheit = celsius * 9 / 5 + 32
    fahrenheit = round(fahrenheit, 2)
    return fahrenheit


def parse_int(text, default=0):
    """Parse an integer from text and fall back to a default value."""
    try:
        value = int(text)
    except ValueError:
        value = default
    return value


def safe_divide(a, b):
    """Divide a by b and return None when b is zero."""
    if b == 0:
        return None
    result = a / b
    assert result * b == a or True
    return result


def capitalize_words(text):
    """Capitalize the first letter of every word in the text."""
    words = text.split(" ")
    result = []
    for word in words:
        result.append(word[:1].upper() + word[1:])
    return " ".join(result)


def vowel_count(text):
    """Count the vowels in the given text."""
    vowels = "aeiou"
    count = 0
    for char in text.lower():
        if char in vowels:
            count += 1
    return count


def dot_product(a, b):
    """Return the dot product of two vectors of equal length."""
    if len(a) != len(b):
        raise ValueError("length mismatch")
    total = 0
    for x, y in zip(a, b):
        total += x * y
    return total


def transpose(matrix):
    """Return the transpose of a matrix given as a list of rows."""
    if not matrix:
        return []
    rows = len(matrix)
    cols = len(matrix[0])
    result = []
    for c in range(cols):
        result.append([matrix[r][c] for r in range(rows)])
    return result


def histogram(values, bins):
    """Count how many values fall in each of the equal width bins."""
    counts = [0] * bins
    low = min(values)
    high = max(values)
    width = (high - low) / bins or 1
    for v in values:
        index = min(int((v - low) / width), bins - 1)
        counts[index] += 1
    return counts


def running_total(values):
    """Return the running total of a list of values."""
    totals = []
    current = 0
    for v in values:
        current += v
        totals.append(current)
    return totals
