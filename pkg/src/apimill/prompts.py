"""Prompt templates and response schemas for the remote judge/guess backends.

These strings are functional constants: downstream code and fixtures match on
them verbatim, so edit with care (including the historical "severl" typo in
the guess prompt — backends were tuned against that exact text).
"""

from __future__ import annotations

EXTRACTION_INSTRUCTION = (
    "You will be given an API documentation. "
    "Extract the API endpoints and output in JSON format."
)

RESPONSE_VALIDATION_PROMPT = """\
Decide if the following API response is an information or an error message.

API Description:
{description}

API Response:
{response}
"""

PARAMETER_GUESS_PROMPT = """\
You will be provided with the information of an API and its parameters. The example values of the parameters are missing. You need to guess the parameter values.
You may have failed severl times before. If you guess with similar values, you may fail again. Please be innovative and try different values and formats.

Your previous failed guesses:
***history start
{history}
***history end

API Description:
{description}

Parameter Description:
{param_description}

Your Guess:
"""

DOC_CLASSIFICATION_PROMPT = """\
You need to group the API documentation with the following standards:

Fully Organized: The documentation follows a well defined template, most likely to be from an API platform. It is well-structured, clear, and easy to understand. It includes detailed descriptions, example code, and explanations of how to use the API.
Semi-Organized: Lacks some structure, but still includes most of the necessary information. It may be missing some examples or descriptions, making it slightly more difficult to understand how to use the API.
Unorganized: Missing example or description, or the structure is unclear, making it difficult to understand how to use the API.

===
API Documentation:
{API_DOC}
"""

# Structured-output schema for the guess backend: a non-empty list of
# {parameter_key, parameter_guess} pairs.
PARAMETER_LIST_SCHEMA = {
    "type": "object",
    "properties": {
        "parameters": {
            "type": "array",
            "minItems": 1,
            "description": "The list of parameters and their guesses.",
            "items": {
                "type": "object",
                "properties": {
                    "parameter_key": {"type": "string"},
                    "parameter_guess": {
                        "type": "string",
                        "description": "The guessed values of the parameter.",
                    },
                },
                "required": ["parameter_key", "parameter_guess"],
            },
        }
    },
    "required": ["parameters"],
}

# Structured-output schema for the documentation classifier.
CLASSIFICATION_SCHEMA = {
    "type": "object",
    "properties": {
        "analysis": {
            "type": "string",
            "description": (
                "The analysis of the API documentation. "
                "Make it within 300 characters."
            ),
        },
        "category": {
            "type": "string",
            "enum": ["Fully Organized", "Semi-Organized", "Unorganized"],
        },
    },
    "required": ["analysis", "category"],
}

DOC_CATEGORIES = ("Fully Organized", "Semi-Organized", "Unorganized")
