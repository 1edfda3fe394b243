"""
Learning, exact solution and control over GVF questions.
"""
